// bcs: block compressive sensing single-pixel imaging toolkit.
//
// Subcommands cover the full pipeline: gen-matrix, sample, simulate-acquire,
// calibrate, train, reconstruct, evaluate. Every successful run writes a
// sidecar `<out>.run` file with the resolved configuration, sufficient to
// reproduce the output. Exit codes: 0 success, 2 usage/validation/format,
// 3 provenance (fingerprint mismatch), 4 numerical failure.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <bcs/bcs.hpp>

namespace {

struct Sidecar {
    std::vector<std::pair<std::string, std::string>> entries;

    void add(const std::string& key, const std::string& value) { entries.push_back({key, value}); }
    void add(const std::string& key, double value) {
        std::ostringstream s;
        s.precision(17);
        s << value;
        add(key, s.str());
    }
    void add(const std::string& key, long long value) { add(key, std::to_string(value)); }
    void add(const std::string& key, std::uint64_t value) { add(key, std::to_string(value)); }
    void add(const std::string& key, int value) { add(key, std::to_string(value)); }

    void write(const std::string& out_path) const {
        const std::string path = out_path + ".run";
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw bcs::FormatError("cannot write sidecar " + path);
        for (const auto& [k, v] : entries) out << k << '=' << v << '\n';
    }
};

std::uint64_t env_seed() {
    if (const char* s = std::getenv("BCS_SEED")) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(s, &end, 10);
        if (end && *end == '\0') return v;
    }
    return 0;
}

// The realizable ratios are the lattice p/B^2; anything else is a usage error.
void require_lattice_ratio(int block, double ratio) {
    const int n = block * block;
    const double p = ratio * n;
    const double rp = std::round(p);
    if (rp >= 1.0 && rp <= n && std::abs(p - rp) <= 1e-9 * n) return;
    std::ostringstream msg;
    msg << "ratio " << ratio << " is not realizable for block size " << block
        << "; valid ratios are multiples of " << 1.0 / n << ":";
    const auto ratios = bcs::valid_ratios(block);
    const std::size_t shown = std::min<std::size_t>(ratios.size(), 16);
    for (std::size_t i = 0; i < shown; ++i) msg << ' ' << ratios[i];
    if (shown < ratios.size()) msg << " ...";
    throw bcs::ValidationError(msg.str());
}

int cmd_gen_matrix(int block, double ratio, std::uint64_t seed, const std::string& out) {
    require_lattice_ratio(block, ratio);
    bcs::SamplingConfig cfg{block, ratio, seed};
    const bcs::BlockMatrix m = bcs::generate_block_matrix(cfg);
    bcs::write_matrix(m, out);
    Sidecar sc;
    sc.add("command", std::string("gen-matrix"));
    sc.add("block", block);
    sc.add("ratio", ratio);
    sc.add("seed", seed);
    sc.add("out", out);
    sc.add("fingerprint", bcs::to_hex(m.fingerprint));
    sc.write(out);
    std::cout << "matrix: " << m.rows << "x" << m.cols() << " (B=" << block << ", ratio=" << ratio
              << ", seed=" << seed << ")\n";
    std::cout << "fingerprint: " << bcs::to_hex(m.fingerprint) << "\n";
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_sample(const std::string& matrix_path, const std::string& image_path,
               const std::string& out) {
    const bcs::BlockMatrix m = bcs::read_matrix(matrix_path);
    const bcs::ImagePlane img = bcs::read_image(image_path);
    const bcs::MeasurementTensor t = bcs::sample_image(m, img);
    bcs::write_tensor(t, out);
    Sidecar sc;
    sc.add("command", std::string("sample"));
    sc.add("matrix", matrix_path);
    sc.add("image", image_path);
    sc.add("out", out);
    sc.add("fingerprint", bcs::to_hex(t.matrix_fingerprint));
    sc.write(out);
    std::cout << "tensor: " << t.grid_h << "x" << t.grid_w << "x" << t.channels << " ("
              << t.size() << " measurements)\n";
    std::cout << "fingerprint: " << bcs::to_hex(t.matrix_fingerprint) << "\n";
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_simulate_acquire(const std::string& scene_path, const std::string& matrix_path,
                         double gain, double dark, double noise, std::uint64_t seed,
                         const std::string& out) {
    const bcs::BlockMatrix m = bcs::read_matrix(matrix_path);
    const bcs::TargetScene scene(bcs::read_image(scene_path));
    const bcs::DetectorModel detector{gain, dark, noise};
    const bcs::RawMeasurementSet raw = bcs::acquire(scene, m, detector, seed);
    bcs::write_raw(raw, out);
    Sidecar sc;
    sc.add("command", std::string("simulate-acquire"));
    sc.add("scene", scene_path);
    sc.add("matrix", matrix_path);
    sc.add("gain", gain);
    sc.add("dark", dark);
    sc.add("noise", noise);
    sc.add("seed", seed);
    sc.add("out", out);
    sc.add("fingerprint", bcs::to_hex(raw.matrix_fingerprint));
    sc.write(out);
    std::cout << "acquired " << raw.voltages.size() << " voltages (dark=" << raw.dark_reading
              << ", bright=" << raw.bright_reading << ")\n";
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_calibrate(const std::string& raw_path, const std::string& matrix_path,
                  const std::string& out, bool have_a, double a_flag, bool have_b, double b_flag,
                  int grid_h, int grid_w) {
    const bcs::RawMeasurementSet raw = bcs::read_raw(raw_path);
    const bcs::BlockMatrix m = bcs::read_matrix(matrix_path);
    if (raw.matrix_fingerprint != m.fingerprint) {
        throw bcs::ProvenanceError("raw measurements were not acquired under this matrix");
    }
    if (raw.voltages.size() % static_cast<std::size_t>(m.rows) != 0) {
        throw bcs::DimensionError("voltage count is not a multiple of the matrix row count");
    }
    const std::size_t blocks = raw.voltages.size() / static_cast<std::size_t>(m.rows);
    if (grid_h <= 0 || grid_w <= 0) {
        const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(blocks))));
        if (side * side != blocks) {
            throw bcs::ValidationError(
                "block grid is not square; pass --grid-h and --grid-w explicitly");
        }
        grid_h = grid_w = static_cast<int>(side);
    }
    const double pixels = static_cast<double>(blocks) * m.cols();
    bcs::CalibrationParams params;
    params.a = have_a ? a_flag : raw.dark_reading / pixels;
    params.b = have_b ? b_flag
                      : bcs::estimate_bright(raw.bright_reading, raw.dark_reading,
                                             grid_h * m.block_size, grid_w * m.block_size);
    const bcs::MeasurementTensor t = bcs::calibrate(raw, params, m, grid_h, grid_w);
    bcs::write_tensor(t, out);
    Sidecar sc;
    sc.add("command", std::string("calibrate"));
    sc.add("raw", raw_path);
    sc.add("matrix", matrix_path);
    sc.add("out", out);
    sc.add("a", params.a);
    sc.add("b", params.b);
    sc.add("grid_h", grid_h);
    sc.add("grid_w", grid_w);
    sc.add("fingerprint", bcs::to_hex(t.matrix_fingerprint));
    sc.write(out);
    std::cout << "calibrated with a=" << params.a << ", b=" << params.b << "\n";
    std::cout << "wrote " << out << "\n";
    return 0;
}

std::array<int, 5> parse_channels(const std::string& spec) {
    std::array<int, 5> out{};
    std::istringstream in(spec);
    std::string tok;
    int i = 0;
    while (std::getline(in, tok, ',')) {
        if (i >= 5) throw bcs::ValidationError("--encoder-channels expects 5 values");
        out[static_cast<std::size_t>(i++)] = std::stoi(tok);
    }
    if (i != 5) throw bcs::ValidationError("--encoder-channels expects 5 values");
    return out;
}

int cmd_train(const std::string& corpus_dir, const std::string& matrix_path,
              const std::string& out, const bcs::TrainConfig& tcfg, std::uint64_t split_seed,
              std::uint64_t model_seed, bool no_augment, int upsample_channels,
              const std::string& encoder_channels, const std::string& log_path) {
    const bcs::BlockMatrix matrix = bcs::read_matrix(matrix_path);
    const std::vector<bcs::CorpusImage> corpus = bcs::load_corpus(corpus_dir);
    bcs::DatasetSplit split = bcs::split_corpus(corpus, split_seed);

    bcs::ModelConfig mcfg;
    mcfg.in_channels = matrix.rows;
    mcfg.upsample_channels = upsample_channels;
    mcfg.encoder_channels = parse_channels(encoder_channels);
    mcfg.block_size = matrix.block_size;
    bcs::ModelArtifact artifact = bcs::build_model(mcfg, model_seed);

    bcs::AugmentConfig aug;
    aug.enabled = !no_augment;

    const std::string log_file = log_path.empty() ? out + ".log.csv" : log_path;
    std::ofstream log(log_file, std::ios::trunc);
    if (!log) throw bcs::FormatError("cannot write training log " + log_file);

    artifact = bcs::train(std::move(artifact), split.train, split.validation, matrix, tcfg, aug, &log);
    bcs::save_artifact(artifact, out);

    Sidecar sc;
    sc.add("command", std::string("train"));
    sc.add("corpus", corpus_dir);
    sc.add("matrix", matrix_path);
    sc.add("out", out);
    sc.add("batch_size", tcfg.batch_size);
    sc.add("initial_lr", tcfg.initial_lr);
    sc.add("plateau_factor", tcfg.plateau_factor);
    sc.add("plateau_patience", tcfg.plateau_patience);
    sc.add("max_epochs", tcfg.max_epochs);
    sc.add("early_stop_patience", tcfg.early_stop_patience);
    sc.add("seed", tcfg.seed);
    sc.add("split_seed", split_seed);
    sc.add("model_seed", model_seed);
    sc.add("augment", std::string(no_augment ? "0" : "1"));
    sc.add("upsample_channels", upsample_channels);
    sc.add("encoder_channels", encoder_channels);
    sc.add("log", log_file);
    sc.add("matrix_fingerprint", bcs::to_hex(matrix.fingerprint));
    sc.write(out);
    std::cout << "trained " << artifact.metadata.epochs_run << " epochs, best val loss "
              << artifact.metadata.best_val_loss << "\n";
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_reconstruct(const std::string& artifact_path, bool use_tv, const std::string& matrix_path,
                    const std::string& tensor_path, const std::string& out, double lambda,
                    int iters, double tol) {
    const bcs::MeasurementTensor t = bcs::read_tensor(tensor_path);
    bcs::ImagePlane img;
    Sidecar sc;
    sc.add("command", std::string("reconstruct"));
    sc.add("tensor", tensor_path);
    sc.add("out", out);
    if (use_tv) {
        if (matrix_path.empty())
            throw bcs::ValidationError("--tv requires --matrix");
        const bcs::BlockMatrix m = bcs::read_matrix(matrix_path);
        if (t.matrix_fingerprint != m.fingerprint)
            throw bcs::ProvenanceError("tensor was not sampled under this matrix");
        bcs::TVConfig cfg;
        cfg.lambda = lambda;
        cfg.max_iters = iters;
        cfg.tol = tol;
        img = bcs::tv_reconstruct(m, t, t.grid_w * m.block_size, t.grid_h * m.block_size, cfg);
        sc.add("method", std::string("tv"));
        sc.add("matrix", matrix_path);
        sc.add("lambda", lambda);
        sc.add("max_iters", iters);
        sc.add("tol", tol);
    } else {
        const bcs::ModelArtifact artifact = bcs::load_artifact(artifact_path);
        img = bcs::reconstruct(artifact, t);
        sc.add("method", std::string("model"));
        sc.add("artifact", artifact_path);
    }
    bcs::write_pgm(img, out);
    sc.add("fingerprint", bcs::to_hex(t.matrix_fingerprint));
    sc.write(out);
    std::cout << "reconstructed " << img.width << "x" << img.height << "\n";
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_evaluate(const std::string& ref_dir, const std::string& rec_dir, const std::string& out,
                 const std::string& method, const std::string& dataset, double ratio) {
    const std::vector<bcs::CorpusImage> refs = bcs::load_corpus(ref_dir);
    const std::vector<bcs::CorpusImage> recs = bcs::load_corpus(rec_dir);
    std::map<std::string, const bcs::ImagePlane*> rec_by_name;
    for (const auto& r : recs) rec_by_name[r.name] = &r.image;
    std::vector<std::pair<bcs::ImagePlane, bcs::ImagePlane>> pairs;
    std::vector<std::string> names;
    for (const auto& r : refs) {
        const auto it = rec_by_name.find(r.name);
        if (it == rec_by_name.end()) continue;
        pairs.push_back({r.image, *it->second});
        names.push_back(r.name);
    }
    if (pairs.empty())
        throw bcs::ValidationError("no matching filename pairs between the two directories");
    const bcs::EvalReport rep = bcs::evaluate_set(pairs, names, method, dataset, ratio);
    std::ofstream csv(out, std::ios::trunc);
    if (!csv) throw bcs::FormatError("cannot write " + out);
    bcs::write_report_csv(rep, csv);
    bcs::write_report_table(rep, std::cout);
    Sidecar sc;
    sc.add("command", std::string("evaluate"));
    sc.add("reference", ref_dir);
    sc.add("reconstruction", rec_dir);
    sc.add("out", out);
    sc.add("method", method);
    sc.add("dataset", dataset);
    sc.add("ratio", ratio);
    sc.add("pairs", static_cast<long long>(pairs.size()));
    sc.write(out);
    std::cout << "wrote " << out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"block compressive sensing single-pixel imaging toolkit"};
    app.require_subcommand(1);

    // gen-matrix
    auto* gen = app.add_subcommand("gen-matrix", "generate a binary Bernoulli block matrix");
    int gm_block = 4;
    double gm_ratio = 0.25;
    std::uint64_t gm_seed = env_seed();
    std::string gm_out;
    gen->add_option("--block", gm_block, "block size B");
    gen->add_option("--ratio", gm_ratio, "sampling ratio S (multiple of 1/B^2)")->required();
    gen->add_option("--seed", gm_seed, "generator seed");
    gen->add_option("--out", gm_out, "output BCSM1 path")->required();

    // sample
    auto* smp = app.add_subcommand("sample", "block-sample an image into a measurement tensor");
    std::string sm_matrix, sm_image, sm_out;
    smp->add_option("--matrix", sm_matrix, "BCSM1 matrix path")->required();
    smp->add_option("--image", sm_image, "input image (PGM/PNG)")->required();
    smp->add_option("--out", sm_out, "output BCSY1 path")->required();

    // simulate-acquire
    auto* acq = app.add_subcommand("simulate-acquire", "run the simulated single-pixel detector");
    std::string aq_scene, aq_matrix, aq_out;
    double aq_gain = 1.0, aq_dark = 0.0, aq_noise = 0.0;
    std::uint64_t aq_seed = env_seed();
    acq->add_option("--scene", aq_scene, "target scene image")->required();
    acq->add_option("--matrix", aq_matrix, "BCSM1 matrix path")->required();
    acq->add_option("--gain", aq_gain, "detector gain (V per unit intensity)");
    acq->add_option("--dark", aq_dark, "dark offset (V)");
    acq->add_option("--noise", aq_noise, "additive Gaussian noise sigma (V)");
    acq->add_option("--seed", aq_seed, "noise seed");
    acq->add_option("--out", aq_out, "output BCSR1 path")->required();

    // calibrate
    auto* cal = app.add_subcommand("calibrate", "map raw voltages into calibrated measurements");
    std::string cl_raw, cl_matrix, cl_out;
    double cl_a = 0.0, cl_b = 0.0;
    int cl_gh = 0, cl_gw = 0;
    cal->add_option("--raw", cl_raw, "BCSR1 raw measurement path")->required();
    cal->add_option("--matrix", cl_matrix, "BCSM1 matrix path")->required();
    cal->add_option("--out", cl_out, "output BCSY1 path")->required();
    auto* opt_a = cal->add_option("--a", cl_a, "override per-pixel dark level a");
    auto* opt_b = cal->add_option("--b", cl_b, "override per-pixel bright level b");
    cal->add_option("--grid-h", cl_gh, "block grid height (default: square grid)");
    cal->add_option("--grid-w", cl_gw, "block grid width (default: square grid)");

    // train
    auto* trn = app.add_subcommand("train", "train the reconstruction network on a corpus");
    std::string tr_corpus, tr_matrix, tr_out, tr_log;
    bcs::TrainConfig tr_cfg;
    tr_cfg.seed = env_seed();
    std::uint64_t tr_split_seed = 0, tr_model_seed = 0;
    bool tr_split_seed_set = false, tr_model_seed_set = false, tr_no_aug = false;
    std::string tr_channels = "64,128,256,512,512";
    int tr_upsample = 64;
    trn->add_option("--corpus", tr_corpus, "directory of training images")->required();
    trn->add_option("--matrix", tr_matrix, "BCSM1 matrix path")->required();
    trn->add_option("--out", tr_out, "output artifact path")->required();
    trn->add_option("--batch", tr_cfg.batch_size, "batch size K");
    trn->add_option("--lr", tr_cfg.initial_lr, "initial learning rate");
    trn->add_option("--plateau-factor", tr_cfg.plateau_factor, "LR reduction factor");
    trn->add_option("--plateau-patience", tr_cfg.plateau_patience, "epochs before LR reduction");
    trn->add_option("--max-epochs", tr_cfg.max_epochs, "maximum training epochs");
    trn->add_option("--early-stop", tr_cfg.early_stop_patience, "early stopping patience");
    trn->add_option("--seed", tr_cfg.seed, "training seed");
    trn->add_option("--split-seed", tr_split_seed, "corpus split seed (default: --seed)")
        ->each([&](const std::string&) { tr_split_seed_set = true; });
    trn->add_option("--model-seed", tr_model_seed, "weight init seed (default: derived)")
        ->each([&](const std::string&) { tr_model_seed_set = true; });
    trn->add_flag("--no-augment", tr_no_aug, "disable training-time augmentation");
    trn->add_option("--upsample-channels", tr_upsample, "UpsampleNet channel width");
    trn->add_option("--encoder-channels", tr_channels, "5 comma-separated encoder widths");
    trn->add_option("--log", tr_log, "per-epoch CSV log path (default: <out>.log.csv)");

    // reconstruct
    auto* rec = app.add_subcommand("reconstruct", "reconstruct an image from a tensor");
    std::string rc_artifact, rc_matrix, rc_tensor, rc_out;
    bool rc_tv = false;
    double rc_lambda = 0.01, rc_tol = 1e-5;
    int rc_iters = 2000;
    rec->add_option("--artifact", rc_artifact, "trained model artifact");
    rec->add_flag("--tv", rc_tv, "use the TV solver instead of the model");
    rec->add_option("--matrix", rc_matrix, "BCSM1 matrix path (required with --tv)");
    rec->add_option("--tensor", rc_tensor, "BCSY1 measurement tensor")->required();
    rec->add_option("--out", rc_out, "output PGM path")->required();
    rec->add_option("--lambda", rc_lambda, "TV regularization weight");
    rec->add_option("--iters", rc_iters, "TV iteration cap");
    rec->add_option("--tol", rc_tol, "TV relative-change stop tolerance");

    // evaluate
    auto* evl = app.add_subcommand("evaluate", "PSNR/SSIM report over matched image pairs");
    std::string ev_ref, ev_rec, ev_out, ev_method = "model", ev_dataset = "corpus";
    double ev_ratio = 0.0;
    evl->add_option("--reference", ev_ref, "directory of reference images")->required();
    evl->add_option("--reconstruction", ev_rec, "directory of reconstructed images")->required();
    evl->add_option("--out", ev_out, "output CSV path")->required();
    evl->add_option("--method", ev_method, "method label for the report");
    evl->add_option("--dataset", ev_dataset, "dataset label for the report");
    evl->add_option("--ratio", ev_ratio, "sampling ratio label for the report");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed()) return cmd_gen_matrix(gm_block, gm_ratio, gm_seed, gm_out);
        if (smp->parsed()) return cmd_sample(sm_matrix, sm_image, sm_out);
        if (acq->parsed())
            return cmd_simulate_acquire(aq_scene, aq_matrix, aq_gain, aq_dark, aq_noise, aq_seed,
                                        aq_out);
        if (cal->parsed())
            return cmd_calibrate(cl_raw, cl_matrix, cl_out, opt_a->count() > 0, cl_a,
                                 opt_b->count() > 0, cl_b, cl_gh, cl_gw);
        if (trn->parsed()) {
            if (!tr_split_seed_set) tr_split_seed = tr_cfg.seed;
            if (!tr_model_seed_set) tr_model_seed = bcs::derive_seed(tr_cfg.seed, 0x6d6f64656c);
            return cmd_train(tr_corpus, tr_matrix, tr_out, tr_cfg, tr_split_seed, tr_model_seed,
                             tr_no_aug, tr_upsample, tr_channels, tr_log);
        }
        if (rec->parsed()) {
            if (rc_tv == !rc_artifact.empty())
                throw bcs::ValidationError("pass exactly one of --artifact or --tv");
            return cmd_reconstruct(rc_artifact, rc_tv, rc_matrix, rc_tensor, rc_out, rc_lambda,
                                   rc_iters, rc_tol);
        }
        if (evl->parsed())
            return cmd_evaluate(ev_ref, ev_rec, ev_out, ev_method, ev_dataset, ev_ratio);
    } catch (const bcs::ProvenanceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const bcs::NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
