// lumiforge command-line front end.
//
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lumiforge/lumiforge.hpp"

namespace fs = std::filesystem;
using namespace lumiforge;

namespace {

/// key=value log line on stderr.
class Log {
public:
    explicit Log(const char* event) { os_ << "event=" << event; }
    template <class V>
    Log& kv(const char* key, const V& value) {
        os_ << ' ' << key << '=' << value;
        return *this;
    }
    ~Log() { std::cerr << os_.str() << '\n'; }

private:
    std::ostringstream os_;
};

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config, "TOML config file")->check(CLI::ExistingFile);
    app->add_option("--seed", c.seed, "Global seed");
    app->add_option("--threads", c.threads, "Worker threads (0 = all cores)");
}

toml::table base_table(const Common& c) {
    toml::table t = c.config.empty() ? toml::table{} : load_config(c.config);
    if (c.seed) set_config(t, "run", "seed", std::int64_t(*c.seed));
    if (c.threads) set_config(t, "run", "threads", std::int64_t(*c.threads));
    return t;
}

template <class V>
void override_if(toml::table& t, const char* section, const char* key, const std::optional<V>& v) {
    if (!v) return;
    if constexpr (std::is_integral_v<V> && !std::is_same_v<V, bool>)
        set_config(t, section, key, std::int64_t(*v));
    else
        set_config(t, section, key, *v);
}

fs::path dir_of(const fs::path& file) { return file.has_parent_path() ? file.parent_path() : fs::path("."); }

Epi read_epi(const fs::path& p) { return Epi::from_image(png::read(p)); }

// ---------------------------------------------------------------------------

struct OpticsArgs {
    Common common;
    double d_min = 0.0, d_max = 1.0;
    std::size_t steps = 10;
    std::string out, sketch_dir;
};

void run_optics_sweep(const OpticsArgs& a) {
    if (a.steps == 0) throw DomainError("--steps must be >= 1");
    toml::table t = base_table(a.common);
    const auto cam = camera_from(t);
    if (!a.out.empty()) write_run_config(dir_of(a.out), t);
    const auto rows = optics::disparity_sweep(cam, a.d_min, a.d_max, a.steps);

    std::ofstream file;
    if (!a.out.empty()) {
        file.open(a.out);
        if (!file) throw IoError("cannot write " + a.out);
    }
    std::ostream& os = a.out.empty() ? std::cout : file;
    os << "disparity,effective_count\n" << std::setprecision(12);
    for (const auto& r : rows) os << r.disparity << ',' << r.effective_count << '\n';

    if (!a.sketch_dir.empty()) {
        fs::create_directories(a.sketch_dir);
        for (std::size_t k = 0; k < rows.size(); ++k) {
            const auto s = optics::epi_sketch(cam, rows[k].disparity);
            const auto [lo, hi] = std::minmax_element(s.columns.begin(), s.columns.end());
            const std::size_t width = std::size_t(*hi - *lo) + 5;
            Image img(cam.n_views, width, 1.0f);
            for (std::size_t j = 0; j < s.columns.size(); ++j)
                for (std::size_t c = 0; c < kChannels; ++c) img(j, std::size_t(s.columns[j] - *lo) + 2, c) = 0.0f;
            char name[32];
            std::snprintf(name, sizeof name, "sketch_%03zu.png", k);
            png::write(fs::path(a.sketch_dir) / name, img, 8);
        }
    }
    Log("optics_sweep").kv("rows", rows.size()).kv("out", a.out.empty() ? "-" : a.out);
}

struct GenArgs {
    Common common;
    std::size_t count = 0;
    std::string out;
    std::optional<std::size_t> views, pixels;
    std::optional<double> d_min, d_max;
};

void run_gen(const GenArgs& a) {
    toml::table t = base_table(a.common);
    override_if(t, "gen", "views", a.views);
    override_if(t, "gen", "pixels", a.pixels);
    override_if(t, "gen", "d_min", a.d_min);
    override_if(t, "gen", "d_max", a.d_max);
    set_config(t, "gen", "count", std::int64_t(a.count));
    const RunConfig run = run_from(t);
    GenConfig g = gen_from(t);
    g.threads = run.threads;
    write_run_config(a.out, t);
    const auto pairs = gen_training_pairs(run.seed, a.count, g);
    save_pairs(a.out, pairs, {{"seed", run.seed}, {"views", g.views}, {"pixels", g.pixels}});
    Log("gen").kv("count", pairs.size()).kv("seed", run.seed).kv("out", a.out);
}

struct EpiArgs {
    std::string in, out, orientation = "h";
    std::size_t view = 0, row = 0;
    double d = 0.0;
};

void run_epi_extract(const EpiArgs& a) {
    if (a.orientation != "h" && a.orientation != "v") throw DomainError("--orientation must be h or v");
    const auto lf = load_light_field(a.in);
    const Epi e =
        extract_epi(lf, a.orientation == "h" ? Orientation::horizontal : Orientation::vertical, a.view, a.row);
    png::write(a.out, e.as_image(), 16);
    Log("epi_extract").kv("views", e.views()).kv("pixels", e.pixels()).kv("out", a.out);
}

void run_epi_shear(const EpiArgs& a) {
    const Epi e = shear(read_epi(a.in), a.d);
    png::write(a.out, e.as_image(), 16);
    Log("epi_shear").kv("d", a.d).kv("valid", e.valid_count()).kv("out", a.out);
}

struct TrainArgs {
    Common common;
    std::string data, ckpt_out, init_ckpt, loss_csv;
    std::optional<std::size_t> steps, batch;
    std::optional<double> lr;
    bool no_lstm = false;
    bool no_augment = false;
};

void run_train(const TrainArgs& a) {
    toml::table t = base_table(a.common);
    override_if(t, "train", "steps", a.steps);
    override_if(t, "train", "batch", a.batch);
    override_if(t, "train", "lr", a.lr);
    if (a.no_lstm) set_config(t, "network", "use_lstm", false);
    if (a.no_augment) set_config(t, "train", "augment", false);
    set_config(t, "train", "data", a.data);
    const RunConfig run = run_from(t);
    nn::TrainConfig tc = train_from(t);
    tc.seed = run.seed;
    tc.threads = run.threads;
    tc.loss_csv = a.loss_csv.empty() ? dir_of(a.ckpt_out) / "loss.csv" : fs::path(a.loss_csv);
    tc.dump_path = fs::path(a.ckpt_out).concat(".diverged");
    tc.checkpoint_path = a.ckpt_out;
    write_run_config(dir_of(a.ckpt_out), t);

    const auto data = load_pairs(a.data);
    std::optional<nn::Network<float>> net;
    if (!a.init_ckpt.empty()) {
        net.emplace(nn::load_checkpoint(a.init_ckpt).net);
    } else {
        net.emplace(network_from(t));
        net->initialize(run.seed);
    }
    Log("train_start").kv("pairs", data.size()).kv("params", net->params().count()).kv("steps", tc.steps);
    const std::size_t every = std::max<std::size_t>(1, tc.steps / 20);
    const auto log = nn::train(*net, data, tc, [&](std::size_t step, double loss) {
        if ((step + 1) % every == 0) Log("train").kv("step", step + 1).kv("loss", loss);
    });
    nn::save_checkpoint(a.ckpt_out, *net, {net->params().adam_step(), {{"data", a.data}}});
    Log("train_done").kv("final_loss", log.loss.empty() ? 0.0 : log.loss.back()).kv("ckpt", a.ckpt_out);
}

struct InferArgs {
    std::string ckpt, epi_in, epi_out;
};

void run_infer(const InferArgs& a) {
    const auto ck = nn::load_checkpoint(a.ckpt);
    const Epi out = nn::network_forward(ck.net, read_epi(a.epi_in));
    png::write(a.epi_out, out.as_image(), 16);
    Log("infer").kv("views", out.views()).kv("pixels", out.pixels()).kv("out", a.epi_out);
}

struct SrArgs {
    Common common;
    std::string in, ckpt, out;
    std::optional<std::string> plan;
    std::optional<std::size_t> tile_size, overlap;
    bool pin = false;
};

void run_sr(const SrArgs& a) {
    toml::table t = base_table(a.common);
    override_if(t, "sr", "plan", a.plan);
    override_if(t, "sr", "tile_size", a.tile_size);
    override_if(t, "sr", "overlap", a.overlap);
    if (a.pin) set_config(t, "sr", "pin_input_views", true);
    SRPlan plan = plan_from(t);
    plan.threads = run_from(t).threads;
    write_run_config(a.out, t);
    const auto ck = nn::load_checkpoint(a.ckpt);
    const auto lf = load_light_field(a.in);
    const auto out = super_resolve(lf, ck.net, plan);
    const auto manifest = save_light_field(out, a.out);
    const auto& d = out.dims();
    Log("sr").kv("plan", to_string(plan.order)).kv("out_dims", std::to_string(d.views_v) + "x" +
                                                               std::to_string(d.views_u) + "x" +
                                                               std::to_string(d.height) + "x" +
                                                               std::to_string(d.width))
        .kv("manifest", manifest.string());
}

struct EvalArgs {
    Common common;
    std::string ref, test, out;
};

void run_eval(const EvalArgs& a) {
    toml::table t = base_table(a.common);
    write_run_config(dir_of(a.out), t);
    const auto report = evaluate_light_fields(load_light_field(a.ref), load_light_field(a.test), run_from(t).threads);
    write_view_csv(report, a.out);
    Log l("eval");
    l.kv("views", report.views.size()).kv("mean_psnr", report.mean_psnr);
    if (report.mean_ssim) l.kv("mean_ssim", *report.mean_ssim);
}

struct SweepArgs {
    Common common;
    std::string ckpt, out;
    std::vector<double> d_list;
    std::optional<double> d_min, d_max;
    std::size_t steps = 9, trials = 8;
    std::optional<std::size_t> views, pixels;
};

void run_sweep(const SweepArgs& a) {
    toml::table t = base_table(a.common);
    override_if(t, "gen", "views", a.views);
    override_if(t, "gen", "pixels", a.pixels);
    const RunConfig run = run_from(t);
    GenConfig g = gen_from(t);
    std::vector<double> ds = a.d_list;
    if (ds.empty()) {
        if (!a.d_min || !a.d_max) throw DomainError("give --d-list or both --d-min and --d-max");
        for (std::size_t i = 0; i < a.steps; ++i)
            ds.push_back(a.steps == 1 ? *a.d_min : *a.d_min + (*a.d_max - *a.d_min) * double(i) / double(a.steps - 1));
    }
    write_run_config(dir_of(a.out), t);
    std::optional<nn::LoadedCheckpoint> ck;
    if (!a.ckpt.empty()) ck.emplace(nn::load_checkpoint(a.ckpt));
    const auto curve = disparity_sweep(ck ? &ck->net : nullptr, ds, a.trials, run.seed, g, run.threads);
    write_curve_csv(curve, a.out);
    Log("sweep").kv("rows", curve.size()).kv("model", a.ckpt.empty() ? "bicubic" : a.ckpt).kv("out", a.out);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lumiforge: light-field optics, EPI tooling and CNN-LSTM super-resolution"};
    app.require_subcommand(1);

    OpticsArgs optics_args;
    auto* optics = app.add_subcommand("optics", "Plenoptic sampling analysis");
    optics->require_subcommand(1);
    auto* sweep_cmd = optics->add_subcommand("sweep", "Effective recorded-point count over a disparity range");
    add_common(sweep_cmd, optics_args.common);
    sweep_cmd->add_option("--d-min", optics_args.d_min)->required();
    sweep_cmd->add_option("--d-max", optics_args.d_max)->required();
    sweep_cmd->add_option("--steps", optics_args.steps)->required();
    sweep_cmd->add_option("--out", optics_args.out, "CSV path (default: stdout)");
    sweep_cmd->add_option("--sketch-dir", optics_args.sketch_dir, "Write one EPI sketch PNG per disparity");

    GenArgs gen_args;
    auto* gen = app.add_subcommand("gen", "Generate procedural LR/HR EPI pairs");
    add_common(gen, gen_args.common);
    gen->add_option("--count", gen_args.count)->required()->check(CLI::PositiveNumber);
    gen->add_option("--out", gen_args.out)->required();
    gen->add_option("--views", gen_args.views, "LR views per EPI");
    gen->add_option("--pixels", gen_args.pixels, "LR pixels per EPI");
    gen->add_option("--d-min", gen_args.d_min);
    gen->add_option("--d-max", gen_args.d_max);

    EpiArgs epi_args;
    auto* epi = app.add_subcommand("epi", "EPI extraction and shearing");
    epi->require_subcommand(1);
    auto* extract = epi->add_subcommand("extract", "Extract one EPI from a light field");
    extract->add_option("--in", epi_args.in, "Light-field manifest")->required()->check(CLI::ExistingFile);
    extract->add_option("--orientation", epi_args.orientation, "h or v");
    extract->add_option("--view", epi_args.view, "Fixed view index (v for h, u for v)");
    extract->add_option("--row", epi_args.row, "Fixed pixel row (y for h) or column (x for v)");
    extract->add_option("--out", epi_args.out)->required();
    auto* shear_cmd = epi->add_subcommand("shear", "Shear an EPI image");
    shear_cmd->add_option("--in", epi_args.in)->required()->check(CLI::ExistingFile);
    shear_cmd->add_option("--d", epi_args.d, "Disparity")->required();
    shear_cmd->add_option("--out", epi_args.out)->required();

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "Train the EPI super-resolution network");
    add_common(train, train_args.common);
    train->add_option("--data", train_args.data, "Directory written by 'gen'")->required()->check(CLI::ExistingDirectory);
    train->add_option("--steps", train_args.steps);
    train->add_option("--batch", train_args.batch);
    train->add_option("--lr", train_args.lr);
    train->add_option("--ckpt-out", train_args.ckpt_out)->required();
    train->add_option("--init-ckpt", train_args.init_ckpt, "Resume from a checkpoint")->check(CLI::ExistingFile);
    train->add_option("--loss-csv", train_args.loss_csv, "Per-step loss CSV (default: next to the checkpoint)");
    train->add_flag("--no-lstm", train_args.no_lstm, "Replace each c-LSTM by a shape-matched conv");
    train->add_flag("--no-augment", train_args.no_augment);

    InferArgs infer_args;
    auto* infer = app.add_subcommand("infer", "Super-resolve one EPI image");
    infer->add_option("--ckpt", infer_args.ckpt)->required()->check(CLI::ExistingFile);
    infer->add_option("--epi-in", infer_args.epi_in)->required()->check(CLI::ExistingFile);
    infer->add_option("--epi-out", infer_args.epi_out)->required();

    SrArgs sr_args;
    auto* sr = app.add_subcommand("sr", "Super-resolve a 4D light field");
    add_common(sr, sr_args.common);
    sr->add_option("--in", sr_args.in, "Light-field manifest")->required()->check(CLI::ExistingFile);
    sr->add_option("--ckpt", sr_args.ckpt)->required()->check(CLI::ExistingFile);
    sr->add_option("--plan", sr_args.plan, "h-first, v-first or avg");
    sr->add_option("--tile-size", sr_args.tile_size);
    sr->add_option("--overlap", sr_args.overlap);
    sr->add_flag("--pin-input-views", sr_args.pin, "Copy input samples into the output at even indices");
    sr->add_option("--out", sr_args.out)->required();

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "Per-view PSNR/SSIM between two light fields");
    add_common(eval, eval_args.common);
    eval->add_option("--ref", eval_args.ref)->required()->check(CLI::ExistingFile);
    eval->add_option("--test", eval_args.test)->required()->check(CLI::ExistingFile);
    eval->add_option("--out", eval_args.out)->required();

    SweepArgs sweep_args;
    auto* sweep = app.add_subcommand("sweep", "PSNR as a function of disparity on synthetic EPIs");
    add_common(sweep, sweep_args.common);
    sweep->add_option("--ckpt", sweep_args.ckpt, "Checkpoint (omit for the bicubic baseline)")
        ->check(CLI::ExistingFile);
    sweep->add_option("--d-list", sweep_args.d_list, "Disparities")->delimiter(',');
    sweep->add_option("--d-min", sweep_args.d_min);
    sweep->add_option("--d-max", sweep_args.d_max);
    sweep->add_option("--steps", sweep_args.steps);
    sweep->add_option("--trials", sweep_args.trials)->check(CLI::PositiveNumber);
    sweep->add_option("--views", sweep_args.views);
    sweep->add_option("--pixels", sweep_args.pixels);
    sweep->add_option("--out", sweep_args.out)->required();

    if (argc > 1 && argv[1][0] != '-' && !app.get_subcommand_no_throw(argv[1])) {
        std::cerr << "unknown subcommand '" << argv[1] << "'\n" << app.help();
        return 1;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (sweep_cmd->parsed()) run_optics_sweep(optics_args);
        else if (gen->parsed()) run_gen(gen_args);
        else if (extract->parsed()) run_epi_extract(epi_args);
        else if (shear_cmd->parsed()) run_epi_shear(epi_args);
        else if (train->parsed()) run_train(train_args);
        else if (infer->parsed()) run_infer(infer_args);
        else if (sr->parsed()) run_sr(sr_args);
        else if (eval->parsed()) run_eval(eval_args);
        else if (sweep->parsed()) run_sweep(sweep_args);
    } catch (const std::exception& e) {
        Log("error").kv("what", std::string("\"") + e.what() + "\"");
        return 2;
    }
    return 0;
}
