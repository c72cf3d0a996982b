#include "cli.hpp"

#include "hbound/io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <ostream>

namespace hbound::cli {
namespace {

namespace fs = std::filesystem;

struct SolveInputs {
    std::string fpi, priors, hypotheses, config, out_dir;
};

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    size_t start = 0;
    while (start <= s.size()) {
        const size_t comma = s.find(',', start);
        const size_t end = comma == std::string::npos ? s.size() : comma;
        if (end > start) out.push_back(s.substr(start, end - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

struct Loaded {
    std::unique_ptr<Problem> problem;
    std::vector<Hypothesis> hyps;
};

Loaded load_problem(const SolveInputs& in)
{
    const GridFile fg = read_grid(in.fpi);
    const Retina ret = retina_from_grid(fg, in.fpi);
    LogitField2D fpi = fpi_from_grid(fg, in.fpi);
    const auto prior_paths = split_list(in.priors);
    require(!prior_paths.empty(), "--priors: no prior grids given");
    std::vector<LogitField3D> priors;
    for (const std::string& p : prior_paths) priors.push_back(prior_from_grid(read_grid(p), p));
    SolveConfig cfg = in.config.empty() ? SolveConfig{} : parse_config(load_json(in.config), in.config);
    Loaded l;
    l.hyps = parse_hypotheses(load_json(in.hypotheses), in.hypotheses);
    l.problem = std::make_unique<Problem>(ret, std::move(fpi), std::move(priors), cfg);
    for (size_t i = 0; i < l.hyps.size(); ++i)
        require(l.hyps[i].cls < static_cast<int>(prior_paths.size()),
                in.hypotheses + ": hypothesis " + std::to_string(i) + " names class " +
                    std::to_string(l.hyps[i].cls) + " but only " + std::to_string(prior_paths.size()) +
                    " priors were given");
    return l;
}

void ensure_dir(const std::string& d)
{
    std::error_code ec;
    fs::create_directories(d, ec);
    require(!ec && fs::is_directory(d), d + ": cannot create output directory");
}

int cmd_prior_build(const std::string& input, const std::string& output, std::ostream& out)
{
    const PriorSpec spec = parse_prior_spec(load_json(input), input);
    const LogitField3D prior = prior_from_shapes(spec.shapes, spec.epsilon);
    write_grid(output, to_grid(prior, static_cast<int>(spec.shapes.size())));
    out << "prior: " << spec.shapes.size() << " shapes, " << prior.nx << "x" << prior.ny << "x" << prior.nz
        << " -> " << output << "\n";
    return kExitOk;
}

int cmd_scene_synth(const std::string& input, const std::string& output, const std::string& noise,
                    std::uint64_t seed, std::ostream& out)
{
    const NoiseSpec ns = parse_noise(noise);
    const SceneSpec s = parse_scene(load_json(input), input);
    const BinaryGrid shape = voxelize(s.object, s.grid);
    const Rendering r = render_ground_truth(shape, s.pose, s.retina, s.epsilon);
    const LogitField2D fpi = apply_noise(r.fpi, ns, seed);
    write_grid(output, to_grid(fpi, s.retina));
    const long long fg = std::count(r.silhouette.begin(), r.silhouette.end(), std::uint8_t{1});
    out << "scene: " << fg << " silhouette pixels of " << r.silhouette.size() << " -> " << output << "\n";
    return kExitOk;
}

int cmd_solve(const SolveInputs& in, std::ostream& out)
{
    Loaded l = load_problem(in);
    const Problem& pb = *l.problem;
    const SolveReport rep = solve(pb, l.hyps);
    ensure_dir(in.out_dir);
    const fs::path dir(in.out_dir);
    write_text((dir / "report.json").string(), report_json(rep, l.hyps, pb.config).dump(2) + "\n");
    write_text((dir / "traces.csv").string(), traces_csv(rep.trace));
    for (size_t s = 0; s < rep.solutions.size(); ++s) {
        const fs::path sd = dir / ("solution_" + std::to_string(rep.solutions[s]));
        ensure_dir(sd.string());
        const RasterGrids g = to_grids(rep.rasters[s], pb.retina, pb.config.n_r, pb.config.epsilon);
        write_grid((sd / "q_hat.grid").string(), g.q_hat);
        write_grid((sd / "q_tilde.grid").string(), g.q_tilde);
        write_grid((sd / "v_hat.grid").string(), g.v_hat);
        write_grid((sd / "v_tilde.grid").string(), g.v_tilde);
    }
    out << "solve: " << termination_name(rep.reason) << ", " << rep.solutions.size() << " solution(s)";
    if (rep.winner >= 0) out << ", winner " << rep.winner;
    out << ", " << rep.cycles << " cycles, " << rep.voxels_evaluated << " voxel evaluations\n";
    return kExitOk;
}

int cmd_oracle(const SolveInputs& in, std::ostream& out)
{
    Loaded l = load_problem(in);
    const Problem& pb = *l.problem;
    const OracleResult r = argmax_exhaustive(pb, l.hyps);
    bool any = false;
    for (const ExactEvidence& e : r.table) any = any || !e.degenerate;
    if (!any) throw DegenerateError("oracle: every hypothesis projects outside the retina");
    ensure_dir(in.out_dir);
    write_text((fs::path(in.out_dir) / "oracle_report.json").string(),
               oracle_report_json(r, l.hyps, pb.config, pb.lambda).dump(2) + "\n");
    out << "oracle: argmax " << r.best << ", " << r.total_voxels << " voxel evaluations\n";
    return kExitOk;
}

void add_solve_flags(CLI::App* c, SolveInputs& in)
{
    c->add_option("--fpi", in.fpi, "Image Bernoulli field (grid file)")->required();
    c->add_option("--priors", in.priors, "Comma-separated class prior grid files")->required();
    c->add_option("--hypotheses", in.hypotheses, "Hypothesis list (JSON)")->required();
    c->add_option("--config", in.config, "Solver configuration (JSON)");
    c->add_option("-o,--output", in.out_dir, "Output directory")->required();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"hbound: hypothesize-and-bound recognition of 3D objects from a single view", "hbound"};
    app.require_subcommand(1);

    std::string prior_in, prior_out;
    CLI::App* prior = app.add_subcommand("prior", "Class prior tools");
    prior->require_subcommand(1);
    CLI::App* build = prior->add_subcommand("build", "Estimate a class prior from training shapes");
    build->add_option("shapes", prior_in, "Training shapes (JSON)")->required();
    build->add_option("-o,--output", prior_out, "Output prior grid")->required();

    std::string scene_in, scene_out, noise = "none";
    std::uint64_t seed = 1;
    CLI::App* scene = app.add_subcommand("scene", "Scene tools");
    scene->require_subcommand(1);
    CLI::App* synth = scene->add_subcommand("synth", "Render the image field of a synthetic scene");
    synth->add_option("scene", scene_in, "Scene description (JSON)")->required();
    synth->add_option("-o,--output", scene_out, "Output image grid")->required();
    synth->add_option("--noise", noise, "none, sp:P, s:L or gauss:SIGMA");
    synth->add_option("--seed", seed, "Noise seed");

    SolveInputs solve_in, oracle_in;
    CLI::App* solve_cmd = app.add_subcommand("solve", "Select the best hypothesis by hypothesize-and-bound");
    add_solve_flags(solve_cmd, solve_in);
    CLI::App* oracle_cmd = app.add_subcommand("oracle", "Evaluate every hypothesis exactly");
    add_solve_flags(oracle_cmd, oracle_in);

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    }
    catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    }
    catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    }
    catch (const CLI::ParseError& e) {
        err << "hbound: " << e.what() << "\n";
        return kExitInput;
    }

    try {
        if (build->parsed()) return cmd_prior_build(prior_in, prior_out, out);
        if (synth->parsed()) return cmd_scene_synth(scene_in, scene_out, noise, seed, out);
        if (solve_cmd->parsed()) return cmd_solve(solve_in, out);
        if (oracle_cmd->parsed()) return cmd_oracle(oracle_in, out);
    }
    catch (const ParameterError& e) {
        err << "hbound: " << e.what() << "\n";
        return kExitInput;
    }
    catch (const DegenerateError& e) {
        err << "hbound: " << e.what() << "\n";
        return kExitDegenerate;
    }
    return kExitInput;
}

}  // namespace hbound::cli
