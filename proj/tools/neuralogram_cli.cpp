// neuralogram: command-line front end.
//
//   synth            generate the synthetic corpus (WAVs + manifest.csv)
//   train            train the classifier, write a checkpoint
//   eval             per-class AUC on a held-out corpus
//   extract          Neuralogram of a WAV file (CSV or NLGMAT01 binary)
//   probe-chirp      down/up chirp probe report
//   probe-rhythm     accelerating impulse-train probe report
//   study-embedding  train one model per embedding size and compare
//   render           matrix / spectrogram -> PGM
//   gradcheck        finite-difference check of an architecture preset
//
// Exit status: 0 success, 1 usage error, 2 data or model error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "neuralogram/neuralogram.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw nlg::IoError("cannot open " + path);
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw nlg::FormatError(path + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw nlg::IoError("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

// JSON-lines run log kept next to a command's artifacts.
class RunLog {
 public:
  RunLog(const fs::path& dir, std::string command) : command_(std::move(command)) {
    fs::create_directories(dir);
    out_.open(dir / "run_log.jsonl", std::ios::app);
    start_ = std::chrono::steady_clock::now();
  }

  void event(const std::string& name, json fields = json::object()) {
    fields["event"] = name;
    fields["command"] = command_;
    fields["t_s"] = elapsed();
    out_ << fields.dump() << '\n';
    out_.flush();
  }

  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::string command_;
  std::ofstream out_;
  std::chrono::steady_clock::time_point start_;
};

fs::path artifact_dir(const std::string& out) {
  const fs::path p(out);
  return p.has_parent_path() ? p.parent_path() : fs::path(".");
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

nlg::CorpusSpec corpus_spec(const std::string& spec_path, std::optional<std::size_t> n_clips,
                            std::optional<std::uint64_t> seed) {
  nlg::CorpusSpec spec;
  if (!spec_path.empty()) spec = read_json_file(spec_path).get<nlg::CorpusSpec>();
  if (n_clips) spec.n_clips = *n_clips;
  if (seed) spec.seed = *seed;
  spec.validate();
  return spec;
}

nlg::Matrix load_matrix(const std::string& path, double* hop_s = nullptr) {
  if (ends_with(path, ".csv")) {
    std::ifstream f(path);
    if (!f) throw nlg::IoError("cannot open " + path);
    auto ng = nlg::read_neuralogram_csv(f);
    if (hop_s) *hop_s = ng.hop_s;
    return ng.data;
  }
  if (ends_with(path, ".wav")) {
    auto s = nlg::power_spectrogram(nlg::read_wav(path), nlg::StftConfig{});
    if (hop_s) *hop_s = s.hop_s;
    return s.data;
  }
  auto ng = nlg::load_neuralogram(path);
  if (hop_s) *hop_s = ng.hop_s;
  return ng.data;
}

void save_neuralogram_any(const nlg::Neuralogram& ng, const std::string& path) {
  if (path.empty()) return;
  if (ends_with(path, ".csv")) {
    std::ofstream f(path);
    if (!f) throw nlg::IoError("cannot write " + path);
    nlg::write_neuralogram_csv(f, ng);
  } else {
    nlg::save_neuralogram(ng, path);
  }
}

nlg::RenderSpec render_spec(const std::string& scale, double floor_db, const std::string& normalize) {
  nlg::RenderSpec r;
  if (scale == "log") r.scale = nlg::RenderSpec::Scale::log10_clamped;
  else if (scale != "linear") throw UsageError("--scale must be linear or log");
  if (normalize == "per-row") r.normalize = nlg::RenderSpec::Normalize::per_row;
  else if (normalize != "global") throw UsageError("--normalize must be global or per-row");
  r.floor_db = floor_db;
  return r;
}

std::vector<std::size_t> parse_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoul(item));
    } catch (const std::exception&) {
      throw UsageError("bad embedding size '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError("--sizes is empty");
  return out;
}

template <class T>
void override_if(const std::optional<T>& flag, T& field) {
  if (flag) field = *flag;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neuralogram: stacked neural embeddings of audio"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate the synthetic labeled corpus");
  std::string synth_spec, synth_out;
  std::optional<std::size_t> synth_n;
  std::optional<std::uint64_t> synth_seed;
  synth->add_option("--spec", synth_spec, "Corpus spec JSON");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--n-clips", synth_n, "Override clip count");
  synth->add_option("--seed", synth_seed, "Override seed");

  // train
  auto* trn = app.add_subcommand("train", "Train the classifier and write a checkpoint");
  std::string train_spec, train_cfg_path, train_out;
  std::optional<std::size_t> train_n, train_steps, train_batch, train_emb;
  std::optional<std::uint64_t> train_seed, corpus_seed;
  std::optional<double> train_lr;
  trn->add_option("--spec", train_spec, "Corpus spec JSON");
  trn->add_option("--config", train_cfg_path, "Training config JSON (lr, batch, steps, seed)");
  trn->add_option("--out", train_out, "Checkpoint path")->required();
  trn->add_option("--n-clips", train_n, "Override clip count");
  trn->add_option("--corpus-seed", corpus_seed, "Override corpus seed");
  trn->add_option("--steps", train_steps, "Adam steps");
  trn->add_option("--batch", train_batch, "Minibatch size");
  trn->add_option("--lr", train_lr, "Learning rate");
  trn->add_option("--seed", train_seed, "Training seed");
  trn->add_option("--embedding-size", train_emb, "Embedding units (default 500)");

  // eval
  auto* ev = app.add_subcommand("eval", "Per-class AUC on a held-out corpus");
  std::string eval_ckpt, eval_spec, eval_out;
  std::optional<std::size_t> eval_n;
  std::uint64_t eval_seed = 1042;
  ev->add_option("--ckpt", eval_ckpt, "Checkpoint")->required();
  ev->add_option("--spec", eval_spec, "Corpus spec JSON");
  ev->add_option("--seed", eval_seed, "Held-out corpus seed")->capture_default_str();
  ev->add_option("--n-clips", eval_n, "Held-out clip count (default 400)");
  ev->add_option("--out", eval_out, "Report JSON")->required();

  // extract
  auto* ex = app.add_subcommand("extract", "Compute the Neuralogram of a WAV file");
  std::string ex_ckpt, ex_in, ex_out;
  double ex_hop = 0.5;
  std::optional<std::size_t> ex_layer;
  ex->add_option("--ckpt", ex_ckpt, "Checkpoint")->required();
  ex->add_option("--in", ex_in, "Input WAV")->required();
  ex->add_option("--hop", ex_hop, "Hop in seconds")->capture_default_str();
  ex->add_option("--layer", ex_layer, "Layer index (default: checkpoint embedding layer)");
  ex->add_option("--out", ex_out, "Output .csv or binary matrix")->required();

  // probe-chirp
  auto* pc = app.add_subcommand("probe-chirp", "Down/up linear chirp probe");
  std::string pc_ckpt, pc_cfg, pc_out;
  std::optional<double> pc_hi, pc_lo, pc_dur, pc_hop, pc_min;
  pc->add_option("--ckpt", pc_ckpt, "Checkpoint")->required();
  pc->add_option("--config", pc_cfg, "Probe config JSON");
  pc->add_option("--f-hi", pc_hi, "Upper frequency (Hz)");
  pc->add_option("--f-lo", pc_lo, "Lower frequency (Hz)");
  pc->add_option("--dur", pc_dur, "Total duration of both sweeps (s)");
  pc->add_option("--hop", pc_hop, "Neuralogram hop (s)");
  pc->add_option("--min-activation", pc_min, "Active-row threshold relative to the global maximum");
  pc->add_option("--out", pc_out, "Report JSON")->required();

  // probe-rhythm
  auto* pr = app.add_subcommand("probe-rhythm", "Accelerating impulse-train probe");
  std::string pr_ckpt, pr_cfg, pr_out;
  std::optional<double> pr_p0, pr_p1, pr_dur, pr_hop;
  pr->add_option("--ckpt", pr_ckpt, "Checkpoint")->required();
  pr->add_option("--config", pr_cfg, "Probe config JSON");
  pr->add_option("--p0", pr_p0, "Starting period (s)");
  pr->add_option("--p1", pr_p1, "Final period (s)");
  pr->add_option("--dur", pr_dur, "Duration (s)");
  pr->add_option("--hop", pr_hop, "Neuralogram hop (s)");
  pr->add_option("--out", pr_out, "Report JSON")->required();

  // study-embedding
  auto* st = app.add_subcommand("study-embedding", "Compare embedding sizes");
  std::string st_spec, st_cfg, st_out, st_sizes = "2000,500";
  std::optional<std::size_t> st_steps, st_n;
  st->add_option("--spec", st_spec, "Corpus spec JSON");
  st->add_option("--config", st_cfg, "Training config JSON");
  st->add_option("--sizes", st_sizes, "Comma-separated embedding sizes")->capture_default_str();
  st->add_option("--steps", st_steps, "Adam steps per model");
  st->add_option("--n-clips", st_n, "Override clip count");
  st->add_option("--out", st_out, "Table JSON")->required();

  // render
  auto* rd = app.add_subcommand("render", "Render a matrix (.csv/.nlgm) or WAV spectrogram to PGM");
  std::string rd_in, rd_out, rd_scale = "linear", rd_norm = "global";
  double rd_floor = -80.0;
  std::optional<double> rd_sort;
  rd->add_option("--in", rd_in, "Neuralogram CSV, binary matrix, or WAV")->required();
  rd->add_option("--out", rd_out, "Output PGM")->required();
  rd->add_option("--scale", rd_scale, "linear or log")->capture_default_str();
  rd->add_option("--floor-db", rd_floor, "Log floor relative to the maximum (dB)")->capture_default_str();
  rd->add_option("--normalize", rd_norm, "global or per-row")->capture_default_str();
  rd->add_option("--sort", rd_sort, "Sort rows by peak time; value = active threshold relative to max");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient check (float64, dropout off)");
  std::string gc_arch = "desk", gc_out;
  std::size_t gc_samples = 100, gc_batch = 2;
  double gc_eps = 1e-5;
  std::uint64_t gc_seed = 7;
  gc->add_option("--arch", gc_arch, "desk or deep-19")->capture_default_str();
  gc->add_option("--samples", gc_samples, "Parameters to probe")->capture_default_str();
  gc->add_option("--eps", gc_eps, "Central-difference step")->capture_default_str();
  gc->add_option("--batch", gc_batch, "Random inputs in the batch")->capture_default_str();
  gc->add_option("--seed", gc_seed, "Seed")->capture_default_str();
  gc->add_option("--out", gc_out, "Report JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*synth) {
      RunLog log(synth_out, "synth");
      const auto spec = corpus_spec(synth_spec, synth_n, synth_seed);
      log.event("start", {{"spec", spec}});
      const auto clips = nlg::make_corpus(spec);
      nlg::export_corpus(spec, clips, synth_out);
      write_json_file(fs::path(synth_out) / "corpus.json", spec);
      log.event("end", {{"status", "ok"}, {"clips", clips.size()}});
    } else if (*trn) {
      RunLog log(artifact_dir(train_out), "train");
      const auto spec = corpus_spec(train_spec, train_n, corpus_seed);
      nlg::TrainConfig tc;
      if (!train_cfg_path.empty()) tc = read_json_file(train_cfg_path).get<nlg::TrainConfig>();
      override_if(train_steps, tc.steps);
      override_if(train_batch, tc.batch);
      override_if(train_lr, tc.lr);
      override_if(train_seed, tc.seed);
      const std::size_t emb = train_emb.value_or(500);
      log.event("start", {{"spec", spec}, {"train", tc}, {"embedding_size", emb}});
      const nlg::FeatureConfig fc;
      const auto data = nlg::make_feature_set(nlg::make_corpus(spec), fc);
      auto res = nlg::train(data, spec.classes, nlg::desk_architecture(emb, spec.classes.size()), fc, tc,
                            [&](std::size_t step, double loss) {
                              if (step % 100 == 0) {
                                log.event("progress", {{"step", step}, {"loss", loss}});
                                std::cerr << "step " << step << " loss " << loss << '\n';
                              }
                            });
      res.checkpoint.metadata["corpus"] = spec;
      nlg::save_checkpoint(res.checkpoint, train_out);
      log.event("end", {{"status", "ok"},
                        {"initial_loss", nlg::initial_loss(res.loss_history)},
                        {"final_smoothed_loss", nlg::final_smoothed_loss(res.loss_history)}});
    } else if (*ev) {
      RunLog log(artifact_dir(eval_out), "eval");
      const auto ckpt = nlg::load_checkpoint(eval_ckpt);
      auto spec = corpus_spec(eval_spec, eval_n.value_or(400), eval_seed);
      spec.classes = ckpt.classes;
      log.event("start", {{"spec", spec}});
      const auto data = nlg::make_feature_set(nlg::make_corpus(spec), ckpt.features);
      const auto r = nlg::evaluate(ckpt, data);
      json per = json::object();
      for (std::size_t k = 0; k < r.per_class_auc.size(); ++k)
        per[ckpt.classes[k]] = r.per_class_auc[k] ? json(*r.per_class_auc[k]) : json("undefined");
      const json report = {{"mean_auc", r.mean_auc}, {"per_class_auc", per}, {"heldout", spec}};
      write_json_file(eval_out, report);
      log.event("end", {{"status", "ok"}, {"mean_auc", r.mean_auc}});
    } else if (*ex) {
      RunLog log(artifact_dir(ex_out), "extract");
      const auto ckpt = nlg::load_checkpoint(ex_ckpt);
      const auto wave = nlg::read_wav(ex_in);
      log.event("start", {{"in", ex_in}, {"hop_s", ex_hop}});
      auto ng = nlg::extract(wave, ckpt, {.window_s = ckpt.features.clip_s, .hop_s = ex_hop, .layer = ex_layer});
      ng.source["path"] = ex_in;
      save_neuralogram_any(ng, ex_out);
      log.event("end", {{"status", "ok"}, {"rows", ng.data.rows}, {"frames", ng.data.cols}});
    } else if (*pc) {
      RunLog log(artifact_dir(pc_out), "probe-chirp");
      nlg::ChirpProbeConfig c;
      if (!pc_cfg.empty()) {
        const json j = read_json_file(pc_cfg);
        c.f_hi = j.value("f_hi", c.f_hi);
        c.f_lo = j.value("f_lo", c.f_lo);
        c.dur = j.value("dur", c.dur);
        c.hop_s = j.value("hop_s", c.hop_s);
        c.min_activation_rel = j.value("min_activation_rel", c.min_activation_rel);
      }
      override_if(pc_hi, c.f_hi);
      override_if(pc_lo, c.f_lo);
      override_if(pc_dur, c.dur);
      override_if(pc_hop, c.hop_s);
      override_if(pc_min, c.min_activation_rel);
      log.event("start", {{"config", c}});
      const auto ckpt = nlg::load_checkpoint(pc_ckpt);
      auto r = nlg::chirp_probe(ckpt, c);
      const fs::path dir = artifact_dir(pc_out);
      const std::string stem = fs::path(pc_out).stem().string();
      save_neuralogram_any(r.neuralogram, (dir / (stem + "_neuralogram.csv")).string());
      nlg::RenderSpec rs;
      rs.normalize = nlg::RenderSpec::Normalize::per_row;
      nlg::render_matrix(r.sorted.data, rs, (dir / (stem + "_sorted.pgm")).string());
      r.report.artifacts = {{"neuralogram_csv", stem + "_neuralogram.csv"}, {"sorted_pgm", stem + "_sorted.pgm"}};
      write_json_file(pc_out, r.report);
      log.event("end", {{"status", "ok"}, {"metrics", r.report.metrics}});
    } else if (*pr) {
      RunLog log(artifact_dir(pr_out), "probe-rhythm");
      nlg::RhythmProbeConfig c;
      if (!pr_cfg.empty()) {
        const json j = read_json_file(pr_cfg);
        c.p0 = j.value("p0", c.p0);
        c.p1 = j.value("p1", c.p1);
        c.dur = j.value("dur", c.dur);
        c.hop_s = j.value("hop_s", c.hop_s);
        c.min_corr = j.value("min_corr", c.min_corr);
      }
      override_if(pr_p0, c.p0);
      override_if(pr_p1, c.p1);
      override_if(pr_dur, c.dur);
      override_if(pr_hop, c.hop_s);
      log.event("start", {{"config", c}});
      const auto ckpt = nlg::load_checkpoint(pr_ckpt);
      auto r = nlg::rhythm_probe(ckpt, c);
      const fs::path dir = artifact_dir(pr_out);
      const std::string stem = fs::path(pr_out).stem().string();
      std::ofstream curve(dir / (stem + "_curve.csv"));
      curve << "run,frame,rate_hz,energy,reference\n";
      for (const auto* run : {&r.primary, &r.doubled})
        for (std::size_t j = 0; j < run->rates.size(); ++j)
          curve << run->p0 << ',' << j << ',' << run->rates[j] << ',' << run->curve.energy[j] << ','
                << run->reference[j] << '\n';
      nlg::RenderSpec rs;
      rs.normalize = nlg::RenderSpec::Normalize::per_row;
      const double thr = 0.1 * *std::max_element(r.primary.neuralogram.data.data.begin(),
                                                 r.primary.neuralogram.data.data.end());
      nlg::render_matrix(nlg::sort_rows_by_peak_time(r.primary.neuralogram.data, thr).data, rs,
                         (dir / (stem + "_sorted.pgm")).string());
      r.report.artifacts = {{"curve_csv", stem + "_curve.csv"}, {"sorted_pgm", stem + "_sorted.pgm"}};
      write_json_file(pr_out, r.report);
      log.event("end", {{"status", "ok"}, {"metrics", r.report.metrics}});
    } else if (*st) {
      RunLog log(artifact_dir(st_out), "study-embedding");
      const auto spec = corpus_spec(st_spec, st_n, std::nullopt);
      nlg::TrainConfig tc;
      if (!st_cfg.empty()) tc = read_json_file(st_cfg).get<nlg::TrainConfig>();
      override_if(st_steps, tc.steps);
      const auto sizes = parse_sizes(st_sizes);
      log.event("start", {{"spec", spec}, {"train", tc}, {"sizes", sizes}});
      const nlg::FeatureConfig fc;
      const auto train_set = nlg::make_feature_set(nlg::make_corpus(spec), fc);
      auto held_spec = spec;
      held_spec.seed = spec.seed + 1000;
      held_spec.n_clips = 400;
      const auto heldout = nlg::make_feature_set(nlg::make_corpus(held_spec), fc);
      const auto rows = nlg::embedding_size_study(train_set, heldout, spec.classes, fc, sizes, tc);
      json table = json::array();
      for (const auto& r : rows)
        table.push_back({{"embedding_size", r.embedding_size},
                         {"mean_auc", r.mean_auc},
                         {"chirp_spearman", std::isfinite(r.chirp_spearman) ? json(r.chirp_spearman) : json()}});
      write_json_file(st_out, {{"rows", table}});
      log.event("end", {{"status", "ok"}, {"rows", table}});
    } else if (*rd) {
      RunLog log(artifact_dir(rd_out), "render");
      const auto spec = render_spec(rd_scale, rd_floor, rd_norm);
      nlg::Matrix m = load_matrix(rd_in);
      if (rd_sort) {
        const double mx = *std::max_element(m.data.begin(), m.data.end());
        m = nlg::sort_rows_by_peak_time(m, *rd_sort * mx).data;
      }
      nlg::render_matrix(m, spec, rd_out);
      log.event("end", {{"status", "ok"}, {"rows", m.rows}, {"cols", m.cols}});
    } else if (*gc) {
      nlg::Architecture arch;
      if (gc_arch == "desk") arch = nlg::desk_architecture();
      else if (gc_arch == "deep-19") arch = nlg::deep19_architecture();
      else throw UsageError("--arch must be desk or deep-19");
      nlg::Network<double> net(arch);
      nlg::Rng rng(gc_seed);
      net.init(rng);
      nlg::Tensor<double> x({gc_batch, arch.input_shape[0], arch.input_shape[1], arch.input_shape[2]});
      for (auto& v : x.data) v = rng.uniform();
      nlg::Tensor<double> y({gc_batch, net.num_classes()});
      for (std::size_t i = 0; i < gc_batch; ++i) y.data[i * net.num_classes() + rng.below(net.num_classes())] = 1.0;
      const auto r = nlg::gradient_check(net, x, y, gc_eps, gc_samples, rng);
      std::size_t frozen = 0;
      for (const auto& e : r.entries) frozen += e.frozen_regime;
      const json report = {{"arch", gc_arch},
                           {"samples", gc_samples},
                           {"eps", gc_eps},
                           {"max_rel_error", r.max_rel_error},
                           {"kink_crossing_probes", frozen}};
      std::cout << report.dump(2) << '\n';
      if (!gc_out.empty()) {
        RunLog log(artifact_dir(gc_out), "gradcheck");
        write_json_file(gc_out, report);
        log.event("end", {{"status", "ok"}, {"max_rel_error", r.max_rel_error}});
      }
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const nlg::InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
