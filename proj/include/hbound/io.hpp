#pragma once

#include "hbound/bernoulli.hpp"
#include "hbound/core.hpp"
#include "hbound/foam.hpp"
#include "hbound/geometry.hpp"
#include "hbound/model.hpp"
#include "hbound/oracle.hpp"
#include "hbound/scene.hpp"

#include <json.hpp>

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace hbound {

using Json = nlohmann::json;

inline constexpr int kGridFormatVersion = 1;
inline constexpr int kReportFormatVersion = 1;

// ---------------------------------------------------------------------------------------------
// Grid container: one JSON header line, then little-endian float32 payload in row-major order
// (first dimension fastest).

struct GridFile {
    std::vector<int> dims;         // 2 (u, v) or 3 (x, y, z or u, v, shell)
    std::string payload = "logit";  // logit | prob | binary
    double cell_size = 0;          // 3D grids
    double cell_area = 0;          // 2D grids
    Vec3 origin;                   // ICS origin (3D) or retina center (2D)
    double epsilon = 0.01;
    std::optional<std::array<double, 4>> extent;  // retina patch u0, u1, v0, v1
    int samples = 0;                              // training shapes behind a prior, 0 if n/a
    std::vector<float> data;

    size_t size() const
    {
        size_t n = 1;
        for (int d : dims) n *= static_cast<size_t>(d);
        return dims.empty() ? 0 : n;
    }
};

inline Json grid_header(const GridFile& g)
{
    Json h;
    h["format"] = "hbound-grid";
    h["version"] = kGridFormatVersion;
    h["dims"] = g.dims;
    h["dtype"] = "f32le";
    h["payload"] = g.payload;
    h["epsilon"] = g.epsilon;
    h["origin"] = {g.origin.x, g.origin.y, g.origin.z};
    if (g.dims.size() == 2)
        h["cell_area"] = g.cell_area;
    else
        h["cell_size"] = g.cell_size;
    if (g.extent) h["extent"] = *g.extent;
    if (g.samples > 0) h["N"] = g.samples;
    return h;
}

inline void validate_grid(const GridFile& g, const std::string& where)
{
    require(g.dims.size() == 2 || g.dims.size() == 3, where + ": dims must have 2 or 3 entries");
    for (int d : g.dims) require(d > 0, where + ": dims must be positive");
    require(g.payload == "logit" || g.payload == "prob" || g.payload == "binary",
            where + ": payload must be logit, prob or binary");
    require(g.epsilon > 0 && g.epsilon < 0.5, where + ": epsilon must lie in (0, 0.5)");
    if (g.dims.size() == 2)
        require(g.cell_area > 0, where + ": cell_area must be positive");
    else
        require(g.cell_size > 0, where + ": cell_size must be positive");
    require(g.data.size() == g.size(), where + ": payload size does not match dims");
}

inline void write_grid(std::ostream& os, const GridFile& g)
{
    validate_grid(g, "grid");
    os << grid_header(g).dump() << '\n';
    std::string buf(g.data.size() * 4, '\0');
    for (size_t i = 0; i < g.data.size(); ++i) {
        const auto u = std::bit_cast<std::uint32_t>(g.data[i]);
        for (int b = 0; b < 4; ++b) buf[4 * i + b] = static_cast<char>((u >> (8 * b)) & 0xffu);
    }
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

inline void write_grid(const std::string& path, const GridFile& g)
{
    std::ofstream os(path, std::ios::binary);
    require(static_cast<bool>(os), path + ": cannot open for writing");
    write_grid(os, g);
    require(static_cast<bool>(os), path + ": write failed");
}

inline GridFile read_grid(std::istream& is, const std::string& where)
{
    std::string line;
    require(static_cast<bool>(std::getline(is, line)), where + ": missing grid header");
    Json h;
    try {
        h = Json::parse(line);
    }
    catch (const Json::parse_error& e) {
        throw ParameterError(where + ": line 1: malformed grid header: " + e.what());
    }
    auto field = [&](const char* k) -> const Json& {
        require(h.contains(k), where + ": header field '" + k + "' missing");
        return h.at(k);
    };
    GridFile g;
    try {
        require(field("format") == "hbound-grid", where + ": not an hbound grid file");
        require(field("version") == kGridFormatVersion, where + ": unsupported grid version");
        require(field("dtype") == "f32le", where + ": dtype must be f32le");
        g.dims = field("dims").get<std::vector<int>>();
        g.payload = field("payload").get<std::string>();
        g.epsilon = field("epsilon").get<double>();
        const auto o = field("origin").get<std::vector<double>>();
        require(o.size() == 3, where + ": origin must have 3 entries");
        g.origin = {o[0], o[1], o[2]};
        if (g.dims.size() == 2)
            g.cell_area = field("cell_area").get<double>();
        else
            g.cell_size = field("cell_size").get<double>();
        if (h.contains("extent")) g.extent = h.at("extent").get<std::array<double, 4>>();
        if (h.contains("N")) g.samples = h.at("N").get<int>();
    }
    catch (const Json::exception& e) {
        throw ParameterError(where + ": bad grid header: " + e.what());
    }
    require(g.dims.size() == 2 || g.dims.size() == 3, where + ": dims must have 2 or 3 entries");
    for (int d : g.dims) require(d > 0, where + ": dims must be positive");
    std::string buf(g.size() * 4, '\0');
    is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    require(static_cast<size_t>(is.gcount()) == buf.size(), where + ": truncated payload");
    is.peek();
    require(is.eof(), where + ": trailing bytes after payload");
    g.data.resize(g.size());
    for (size_t i = 0; i < g.data.size(); ++i) {
        std::uint32_t u = 0;
        for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[4 * i + b])) << (8 * b);
        g.data[i] = std::bit_cast<float>(u);
    }
    validate_grid(g, where);
    return g;
}

inline GridFile read_grid(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    require(static_cast<bool>(is), path + ": cannot open");
    return read_grid(is, path);
}

// Payload value converted to a clamped logit.
inline float payload_logit(const GridFile& g, float x)
{
    if (g.payload == "logit") return x;
    if (g.payload == "binary") return static_cast<float>(clamp_logit(x != 0 ? 1.0 : 0.0, g.epsilon));
    return static_cast<float>(clamp_logit(x, g.epsilon));
}

inline GridFile to_grid(const LogitField2D& f, const Retina& r)
{
    GridFile g;
    g.dims = {f.nu, f.nv};
    g.cell_area = f.cell_area;
    g.origin = r.center;
    g.epsilon = f.epsilon;
    g.extent = std::array<double, 4>{r.u0, r.u1, r.v0, r.v1};
    g.data = f.logit;
    return g;
}

inline GridFile to_grid(const LogitField3D& f, int samples = 0)
{
    GridFile g;
    g.dims = {f.nx, f.ny, f.nz};
    g.cell_size = f.cell_size;
    g.origin = f.origin;
    g.epsilon = f.epsilon;
    g.samples = samples;
    g.data = f.logit;
    return g;
}

inline LogitField2D fpi_from_grid(const GridFile& g, const std::string& where = "fpi")
{
    require(g.dims.size() == 2, where + ": image grid must be 2D");
    LogitField2D f;
    f.nu = g.dims[0];
    f.nv = g.dims[1];
    f.cell_area = g.cell_area;
    f.epsilon = g.epsilon;
    f.delta_max = delta_max_of(g.epsilon);
    f.logit.resize(g.data.size());
    for (size_t i = 0; i < g.data.size(); ++i) f.logit[i] = payload_logit(g, g.data[i]);
    f.refresh_constant();
    return f;
}

// Retina described by a 2D grid header; the extent is required.
inline Retina retina_from_grid(const GridFile& g, const std::string& where = "fpi")
{
    require(g.dims.size() == 2, where + ": image grid must be 2D");
    require(g.extent.has_value(), where + ": header lacks the retina extent");
    Retina r;
    r.center = g.origin;
    r.u0 = (*g.extent)[0];
    r.u1 = (*g.extent)[1];
    r.v0 = (*g.extent)[2];
    r.v1 = (*g.extent)[3];
    r.nu = g.dims[0];
    r.nv = g.dims[1];
    r.validate();
    return r;
}

inline LogitField3D prior_from_grid(const GridFile& g, const std::string& where = "prior")
{
    require(g.dims.size() == 3, where + ": prior grid must be 3D");
    LogitField3D f;
    f.nx = g.dims[0];
    f.ny = g.dims[1];
    f.nz = g.dims[2];
    f.cell_size = g.cell_size;
    f.origin = g.origin;
    f.epsilon = g.epsilon;
    f.delta_max = delta_max_of(g.epsilon);
    f.logit.resize(g.data.size());
    for (size_t i = 0; i < g.data.size(); ++i) f.logit[i] = payload_logit(g, g.data[i]);
    f.refresh();
    return f;
}

// Reconstruction rasters of one solution as grid files (q: nu x nv, v: nu x nv x N_r).
struct RasterGrids {
    GridFile q_hat, q_tilde, v_hat, v_tilde;
};

inline RasterGrids to_grids(const Rasters& r, const Retina& ret, int n_r, double eps)
{
    auto make = [&](const std::vector<float>& d, bool volume, const char* payload) {
        GridFile g;
        g.dims = volume ? std::vector<int>{ret.nu, ret.nv, n_r} : std::vector<int>{ret.nu, ret.nv};
        g.payload = payload;
        g.cell_area = ret.cell_area();
        g.cell_size = 1.0;  // one shell per layer
        g.origin = ret.center;
        g.epsilon = eps;
        g.extent = std::array<double, 4>{ret.u0, ret.u1, ret.v0, ret.v1};
        g.data = d;
        return g;
    };
    return {make(r.q_hat, false, "binary"), make(r.q_tilde, false, "prob"), make(r.v_hat, true, "binary"),
            make(r.v_tilde, true, "prob")};
}

// ---------------------------------------------------------------------------------------------
// JSON inputs with field-path diagnostics.

inline Json parse_json_text(const std::string& text, const std::string& where)
{
    try {
        return Json::parse(text);
    }
    catch (const Json::parse_error& e) {
        size_t line = 1, col = 1;
        for (size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            }
            else {
                ++col;
            }
        }
        throw ParameterError(where + ":" + std::to_string(line) + ":" + std::to_string(col) +
                             ": malformed JSON");
    }
}

inline Json load_json(const std::string& path)
{
    std::ifstream is(path);
    require(static_cast<bool>(is), path + ": cannot open");
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_json_text(ss.str(), path);
}

// Typed accessors that report the JSON path of the offending field.
class JsonReader {
public:
    JsonReader(const Json& j, std::string path) : j_(&j), path_(std::move(path))
    {
        require(j.is_object(), path_ + ": expected an object");
    }

    const std::string& path() const { return path_; }
    bool has(const std::string& k) const { return j_->contains(k); }
    std::string at(const std::string& k) const { return path_ + "." + k; }

    const Json& raw(const std::string& k) const
    {
        require(has(k), at(k) + ": required field missing");
        return j_->at(k);
    }

    double number(const std::string& k) const
    {
        const Json& v = raw(k);
        require(v.is_number(), at(k) + ": expected a number");
        return v.get<double>();
    }
    double number(const std::string& k, double dflt) const { return has(k) ? number(k) : dflt; }

    long long integer(const std::string& k) const
    {
        const Json& v = raw(k);
        require(v.is_number_integer(), at(k) + ": expected an integer");
        return v.get<long long>();
    }
    long long integer(const std::string& k, long long dflt) const { return has(k) ? integer(k) : dflt; }

    std::string string(const std::string& k) const
    {
        const Json& v = raw(k);
        require(v.is_string(), at(k) + ": expected a string");
        return v.get<std::string>();
    }

    std::vector<double> numbers(const std::string& k, size_t n) const
    {
        const Json& v = raw(k);
        require(v.is_array() && v.size() == n, at(k) + ": expected an array of " + std::to_string(n) + " numbers");
        std::vector<double> out;
        for (const Json& e : v) {
            require(e.is_number(), at(k) + ": expected an array of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    Vec3 vec3(const std::string& k) const
    {
        const auto v = numbers(k, 3);
        return {v[0], v[1], v[2]};
    }

    void only(std::initializer_list<const char*> keys) const
    {
        for (auto it = j_->begin(); it != j_->end(); ++it) {
            bool ok = false;
            for (const char* k : keys) ok = ok || it.key() == k;
            require(ok, at(it.key()) + ": unknown field");
        }
    }

private:
    const Json* j_;
    std::string path_;
};

// Wraps a ParameterError raised by a module validator with the JSON path being parsed.
template <class F>
auto with_path(const std::string& path, F&& f) -> decltype(f())
{
    try {
        return f();
    }
    catch (const ParameterError& e) {
        throw ParameterError(path + ": " + e.what());
    }
}

inline SolveConfig parse_config(const Json& j, const std::string& where = "config")
{
    const JsonReader r(j, where);
    r.only({"epsilon", "alpha", "lambda", "r_min", "beta", "n_r", "m", "grid_points", "max_gamma_evaluations",
            "gamma_rel_tol", "margin_tol", "budget", "policy", "seed"});
    SolveConfig c;
    c.epsilon = r.number("epsilon", c.epsilon);
    c.alpha = r.number("alpha", c.alpha);
    if (r.has("lambda")) {
        const Json& l = r.raw("lambda");
        if (l.is_string()) {
            require(l == "auto", r.at("lambda") + ": expected a number or \"auto\"");
            c.lambda = -1.0;
        }
        else {
            c.lambda = r.number("lambda");
            require(c.lambda > 0, r.at("lambda") + ": must be positive");
        }
    }
    c.r_min = r.number("r_min", c.r_min);
    c.beta = r.number("beta", c.beta);
    c.n_r = static_cast<int>(r.integer("n_r", c.n_r));
    c.m = static_cast<int>(r.integer("m", c.m));
    c.grid_points = static_cast<int>(r.integer("grid_points", c.grid_points));
    c.max_gamma_evaluations = static_cast<int>(r.integer("max_gamma_evaluations", c.max_gamma_evaluations));
    c.gamma_rel_tol = r.number("gamma_rel_tol", c.gamma_rel_tol);
    c.margin_tol = r.number("margin_tol", c.margin_tol);
    c.budget = r.integer("budget", c.budget);
    if (r.has("policy")) c.policy = with_path(r.at("policy"), [&] { return policy_from_name(r.string("policy")); });
    if (r.has("seed")) {
        const long long s = r.integer("seed");
        require(s >= 0, r.at("seed") + ": must be nonnegative");
        c.seed = static_cast<std::uint64_t>(s);
    }
    with_path(where, [&] {
        c.validate();
        return 0;
    });
    return c;
}

inline Json config_json(const SolveConfig& c)
{
    Json j;
    j["epsilon"] = c.epsilon;
    j["alpha"] = c.alpha;
    if (c.lambda >= 0)
        j["lambda"] = c.lambda;
    else
        j["lambda"] = "auto";
    j["r_min"] = c.r_min;
    j["beta"] = c.beta;
    j["n_r"] = c.n_r;
    j["m"] = c.m;
    j["grid_points"] = c.grid_points;
    j["max_gamma_evaluations"] = c.max_gamma_evaluations;
    j["gamma_rel_tol"] = c.gamma_rel_tol;
    j["margin_tol"] = c.margin_tol;
    j["budget"] = c.budget;
    j["policy"] = policy_name(c.policy);
    j["seed"] = c.seed;
    return j;
}

inline Pose parse_pose(const Json& j, const std::string& where)
{
    const JsonReader r(j, where);
    r.only({"tx", "ty", "phi", "sxy", "sz"});
    Pose p{r.number("tx", 0), r.number("ty", 0), r.number("phi", 0), r.number("sxy", 0), r.number("sz", 0)};
    with_path(where, [&] {
        p.validate();
        return 0;
    });
    return p;
}

inline Json pose_json(const Pose& p) { return {{"tx", p.tx}, {"ty", p.ty}, {"phi", p.phi}, {"sxy", p.sxy}, {"sz", p.sz}}; }

// Rows of (class, tx, ty, phi, sxy, sz), either as arrays or as objects with those keys.
inline std::vector<Hypothesis> parse_hypotheses(const Json& doc, const std::string& where = "hypotheses")
{
    const Json* list = &doc;
    std::string base = where;
    if (doc.is_object()) {
        const JsonReader r(doc, where);
        r.only({"hypotheses"});
        list = &r.raw("hypotheses");
        base = r.at("hypotheses");
    }
    require(list->is_array(), base + ": expected an array of hypotheses");
    require(!list->empty(), base + ": hypothesis list is empty");
    std::vector<Hypothesis> out;
    for (size_t i = 0; i < list->size(); ++i) {
        const Json& row = (*list)[i];
        const std::string p = base + "[" + std::to_string(i) + "]";
        Hypothesis h;
        if (row.is_array()) {
            require(row.size() == 6, p + ": expected 6 values (class, tx, ty, phi, sxy, sz)");
            for (const Json& e : row) require(e.is_number(), p + ": expected numbers");
            require(row[0].is_number_integer(), p + "[0]: class index must be an integer");
            h.cls = row[0].get<int>();
            h.pose = {row[1].get<double>(), row[2].get<double>(), row[3].get<double>(), row[4].get<double>(),
                      row[5].get<double>()};
        }
        else {
            const JsonReader r(row, p);
            r.only({"class", "tx", "ty", "phi", "sxy", "sz"});
            h.cls = static_cast<int>(r.integer("class"));
            h.pose = {r.number("tx", 0), r.number("ty", 0), r.number("phi", 0), r.number("sxy", 0), r.number("sz", 0)};
        }
        require(h.cls >= 0, p + ": class index must be nonnegative");
        with_path(p, [&] {
            h.pose.validate();
            return 0;
        });
        out.push_back(h);
    }
    return out;
}

inline Json hypotheses_json(const std::vector<Hypothesis>& hyps)
{
    Json rows = Json::array();
    for (const Hypothesis& h : hyps) rows.push_back({h.cls, h.pose.tx, h.pose.ty, h.pose.phi, h.pose.sxy, h.pose.sz});
    return {{"hypotheses", rows}};
}

inline Primitive parse_primitive(const Json& j, const std::string& where)
{
    const JsonReader r(j, where);
    Primitive p;
    p.kind = with_path(r.at("kind"), [&] { return primitive_from_name(r.string("kind")); });
    p.center = r.has("center") ? r.vec3("center") : Vec3{};
    p.yaw = r.number("yaw", 0);
    switch (p.kind) {
    case PrimitiveKind::Cylinder:
        r.only({"kind", "center", "yaw", "radius", "height"});
        p.a = p.b = r.number("radius");
        p.c = r.number("height");
        break;
    case PrimitiveKind::Cuboid: {
        r.only({"kind", "center", "yaw", "size"});
        const auto s = r.numbers("size", 3);
        p.a = s[0];
        p.b = s[1];
        p.c = s[2];
        break;
    }
    case PrimitiveKind::Sphere:
        r.only({"kind", "center", "yaw", "radius"});
        p.a = p.b = p.c = r.number("radius");
        break;
    }
    with_path(where, [&] {
        p.validate();
        return 0;
    });
    return p;
}

inline std::vector<Primitive> parse_primitives(const Json& j, const std::string& where)
{
    require(j.is_array() && !j.empty(), where + ": expected a nonempty array of primitives");
    std::vector<Primitive> out;
    for (size_t i = 0; i < j.size(); ++i) out.push_back(parse_primitive(j[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

inline GridGeometry parse_grid_geometry(const Json& j, const std::string& where)
{
    const JsonReader r(j, where);
    r.only({"dims", "cell_size", "origin"});
    const auto d = r.numbers("dims", 3);
    GridGeometry g;
    for (int a = 0; a < 3; ++a)
        require(d[a] >= 1 && d[a] == std::floor(d[a]) && d[a] <= 1024, r.at("dims") + ": entries must be integers in [1, 1024]");
    g.nx = static_cast<int>(d[0]);
    g.ny = static_cast<int>(d[1]);
    g.nz = static_cast<int>(d[2]);
    g.cell = r.number("cell_size");
    require(g.cell > 0, r.at("cell_size") + ": must be positive");
    g.origin = r.vec3("origin");
    return g;
}

// Training set for `prior build`: explicit shapes, or a class sampler with jittered dimensions.
struct PriorSpec {
    GridGeometry grid;
    double epsilon = 0.01;
    std::vector<BinaryGrid> shapes;
};

inline PriorSpec parse_prior_spec(const Json& j, const std::string& where = "shapes")
{
    const JsonReader r(j, where);
    r.only({"grid", "epsilon", "shapes", "class"});
    PriorSpec s;
    s.grid = parse_grid_geometry(r.raw("grid"), r.at("grid"));
    s.epsilon = r.number("epsilon", 0.01);
    require(s.epsilon > 0 && s.epsilon < 0.5, r.at("epsilon") + ": must lie in (0, 0.5)");
    require(r.has("shapes") != r.has("class"), where + ": give exactly one of 'shapes' or 'class'");
    if (r.has("shapes")) {
        const Json& list = r.raw("shapes");
        require(list.is_array() && !list.empty(), r.at("shapes") + ": expected a nonempty array");
        for (size_t i = 0; i < list.size(); ++i)
            s.shapes.push_back(voxelize(parse_primitives(list[i], r.at("shapes") + "[" + std::to_string(i) + "]"), s.grid));
    }
    else {
        const JsonReader c(r.raw("class"), r.at("class"));
        c.only({"name", "parts", "jitter", "samples", "seed"});
        ClassSpec spec;
        spec.name = c.has("name") ? c.string("name") : "";
        spec.parts = parse_primitives(c.raw("parts"), c.at("parts"));
        spec.jitter = c.number("jitter", spec.jitter);
        spec.samples = static_cast<int>(c.integer("samples", spec.samples));
        const long long seed = c.integer("seed", 1);
        require(seed >= 0, c.at("seed") + ": must be nonnegative");
        s.shapes = with_path(c.path(), [&] { return sample_class_shapes(spec, s.grid, static_cast<std::uint64_t>(seed)); });
    }
    return s;
}

struct SceneSpec {
    Retina retina;
    double epsilon = 0.01;
    GridGeometry grid;
    std::vector<Primitive> object;
    Pose pose;
};

inline SceneSpec parse_scene(const Json& j, const std::string& where = "scene")
{
    const JsonReader r(j, where);
    r.only({"retina", "epsilon", "grid", "object", "pose"});
    SceneSpec s;
    if (r.has("retina")) {
        const JsonReader rr(r.raw("retina"), r.at("retina"));
        rr.only({"center", "u", "v", "resolution"});
        if (rr.has("center")) s.retina.center = rr.vec3("center");
        if (rr.has("u")) {
            const auto u = rr.numbers("u", 2);
            s.retina.u0 = u[0];
            s.retina.u1 = u[1];
        }
        if (rr.has("v")) {
            const auto v = rr.numbers("v", 2);
            s.retina.v0 = v[0];
            s.retina.v1 = v[1];
        }
        if (rr.has("resolution")) {
            const auto n = rr.numbers("resolution", 2);
            for (double x : n) require(x >= 1 && x == std::floor(x) && x <= 4096, rr.at("resolution") + ": entries must be integers in [1, 4096]");
            s.retina.nu = static_cast<int>(n[0]);
            s.retina.nv = static_cast<int>(n[1]);
        }
        with_path(rr.path(), [&] {
            s.retina.validate();
            return 0;
        });
    }
    s.epsilon = r.number("epsilon", 0.01);
    require(s.epsilon > 0 && s.epsilon < 0.5, r.at("epsilon") + ": must lie in (0, 0.5)");
    s.grid = parse_grid_geometry(r.raw("grid"), r.at("grid"));
    s.object = parse_primitives(r.raw("object"), r.at("object"));
    s.pose = r.has("pose") ? parse_pose(r.raw("pose"), r.at("pose")) : Pose{};
    return s;
}

// Noise specification: "none", "sp:P", "s:L" or "gauss:SIGMA".
struct NoiseSpec {
    enum class Kind { None, SaltPepper, Structured, Gaussian } kind = Kind::None;
    double value = 0;
};

inline NoiseSpec parse_noise(const std::string& s)
{
    NoiseSpec n;
    if (s.empty() || s == "none") return n;
    const auto colon = s.find(':');
    require(colon != std::string::npos, "--noise: expected sp:P, s:L or gauss:SIGMA, got '" + s + "'");
    const std::string kind = s.substr(0, colon), arg = s.substr(colon + 1);
    size_t used = 0;
    double v = 0;
    try {
        v = std::stod(arg, &used);
    }
    catch (const std::exception&) {
        used = 0;
    }
    require(used == arg.size() && !arg.empty(), "--noise: bad numeric argument '" + arg + "'");
    if (kind == "sp") {
        require(v >= 0 && v <= 1, "--noise sp: P must lie in [0, 1]");
        n.kind = NoiseSpec::Kind::SaltPepper;
    }
    else if (kind == "s") {
        require(v >= 1 && v == std::floor(v), "--noise s: period must be an integer >= 1");
        n.kind = NoiseSpec::Kind::Structured;
    }
    else if (kind == "gauss") {
        require(v >= 0, "--noise gauss: sigma must be >= 0");
        n.kind = NoiseSpec::Kind::Gaussian;
    }
    else {
        throw ParameterError("--noise: unknown kind '" + kind + "'");
    }
    n.value = v;
    return n;
}

inline LogitField2D apply_noise(const LogitField2D& f, const NoiseSpec& n, std::uint64_t seed)
{
    switch (n.kind) {
    case NoiseSpec::Kind::None: return f;
    case NoiseSpec::Kind::SaltPepper: return noise_salt_pepper(f, n.value, seed);
    case NoiseSpec::Kind::Structured: return noise_structured(f, static_cast<int>(n.value));
    case NoiseSpec::Kind::Gaussian: return noise_gaussian(f, n.value, seed);
    }
    return f;
}

// ---------------------------------------------------------------------------------------------
// Outputs.

inline Json report_json(const SolveReport& rep, const std::vector<Hypothesis>& hyps, const SolveConfig& cfg)
{
    Json j;
    j["format"] = "hbound-report";
    j["version"] = kReportFormatVersion;
    j["termination"] = termination_name(rep.reason);
    j["winner"] = rep.winner >= 0 ? Json(rep.winner) : Json(nullptr);
    j["solutions"] = rep.solutions;
    j["cycles"] = rep.cycles;
    j["voxels_evaluated"] = rep.voxels_evaluated;
    j["pixels_evaluated"] = rep.pixels_evaluated;
    j["best_lower"] = rep.best_lower;
    j["lambda"] = rep.lambda;
    j["config"] = config_json(cfg);
    Json hs = Json::array();
    for (size_t i = 0; i < hyps.size(); ++i) {
        const HypothesisOutcome& o = rep.hypotheses[i];
        hs.push_back({{"index", i},
                      {"class", hyps[i].cls},
                      {"pose", pose_json(hyps[i].pose)},
                      {"lower", o.lower},
                      {"upper", o.upper},
                      {"cycles", o.cycles},
                      {"pixels_evaluated", o.pixels_evaluated},
                      {"voxels_evaluated", o.voxels_evaluated},
                      {"degenerate", o.degenerate},
                      {"active", o.active},
                      {"fully_refined", o.fully_refined},
                      {"pruned_at", o.pruned_at >= 0 ? Json(o.pruned_at) : Json(nullptr)}});
    }
    j["hypotheses"] = hs;
    return j;
}

inline Json oracle_report_json(const OracleResult& r, const std::vector<Hypothesis>& hyps, const SolveConfig& cfg,
                               double lambda)
{
    Json j;
    j["format"] = "hbound-oracle-report";
    j["version"] = kReportFormatVersion;
    j["argmax"] = r.best;
    j["total_voxels"] = r.total_voxels;
    j["lambda"] = lambda;
    j["config"] = config_json(cfg);
    Json t = Json::array();
    for (size_t i = 0; i < hyps.size(); ++i)
        t.push_back({{"index", i},
                     {"class", hyps[i].cls},
                     {"pose", pose_json(hyps[i].pose)},
                     {"evidence", r.table[i].value},
                     {"voxels", r.table[i].voxels},
                     {"degenerate", r.table[i].degenerate}});
    j["table"] = t;
    return j;
}

inline std::string format_double(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string traces_csv(const std::vector<TraceRow>& rows)
{
    std::string s = "cycle,hypothesis,lower,upper,slack\n";
    for (const TraceRow& r : rows)
        s += std::to_string(r.cycle) + "," + std::to_string(r.hypothesis) + "," + format_double(r.lower) + "," +
             format_double(r.upper) + "," + format_double(r.slack) + "\n";
    return s;
}

inline void write_text(const std::string& path, const std::string& text)
{
    std::ofstream os(path, std::ios::binary);
    require(static_cast<bool>(os), path + ": cannot open for writing");
    os << text;
    require(static_cast<bool>(os), path + ": write failed");
}

}  // namespace hbound
