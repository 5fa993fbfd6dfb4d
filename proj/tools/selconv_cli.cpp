// selconv command line: train / index / query / evaluate / analyze / bench / synth.
//
// Exit codes: 0 success, 2 invalid input or parameters, 3 I/O failure.

#include <cstdio>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <tuple>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "selconv.hpp"

namespace {

using namespace selconv;

constexpr int kExitInvalid = 2;
constexpr int kExitIo = 3;

struct Overrides {
  std::optional<std::string> mask, embedding, pool, whiten;
  std::optional<int> democratic_iters;
  std::optional<double> pn_alpha, ffaemb_mu;
  std::optional<Index> truncate_head, pca_d, codebook_k, ffaemb_m;
  std::optional<std::uint64_t> seed;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--mask", o.mask, "sift, sum, max or none")->check(CLI::IsMember({"sift", "sum", "max", "none"}));
  cmd->add_option("--embedding", o.embedding, "fv, vlad, temb or ffaemb")
      ->check(CLI::IsMember({"fv", "vlad", "temb", "ffaemb"}));
  cmd->add_option("--pool", o.pool, "sum, avg, max or democratic")
      ->check(CLI::IsMember({"sum", "avg", "max", "democratic"}));
  cmd->add_option("--democratic-iters", o.democratic_iters);
  cmd->add_option("--pn-alpha", o.pn_alpha, "power-law exponent in [0, 1]");
  cmd->add_option("--whiten", o.whiten)->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--truncate-head", o.truncate_head, "leading rotated components to drop");
  cmd->add_option("--pca-d", o.pca_d);
  cmd->add_option("--codebook-k", o.codebook_k);
  cmd->add_option("--ffaemb-m", o.ffaemb_m);
  cmd->add_option("--ffaemb-mu", o.ffaemb_mu);
  cmd->add_option("--seed", o.seed);
}

PipelineConfig apply(PipelineConfig c, const Overrides& o) {
  if (o.mask) c.mask = parse_mask_kind(*o.mask);
  if (o.embedding) c.embedding = parse_embedding(*o.embedding);
  if (o.pool) c.pool = parse_pool_mode(*o.pool);
  if (o.whiten) c.whiten = *o.whiten == "on";
  if (o.democratic_iters) c.democratic_iters = *o.democratic_iters;
  if (o.pn_alpha) c.pn_alpha = *o.pn_alpha;
  if (o.ffaemb_mu) c.ffaemb_mu = *o.ffaemb_mu;
  if (o.truncate_head) c.truncate_head = *o.truncate_head;
  if (o.pca_d) c.pca_d = *o.pca_d;
  if (o.codebook_k) c.codebook_k = *o.codebook_k;
  if (o.ffaemb_m) c.ffaemb_m = *o.ffaemb_m;
  if (o.seed) c.seed = *o.seed;
  c.validate();
  return c;
}

std::pair<std::uint32_t, std::uint32_t> parse_grid(const std::string& s) {
  const auto x = s.find_first_of("xX");
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    const unsigned long w = std::stoul(s.substr(0, x)), h = std::stoul(s.substr(x + 1));
    if (w == 0 || h == 0 || w > UINT32_MAX || h > UINT32_MAX) throw std::out_of_range(s);
    return {static_cast<std::uint32_t>(w), static_cast<std::uint32_t>(h)};
  } catch (const std::logic_error&) {
    throw ParameterError("--grid expects WxH with positive integers, got " + s);
  }
}

void print_ms(const char* stage, const StageStats& s) {
  std::printf("%s\t%.4f\t%.4f\n", stage, s.mean * 1e3, s.median * 1e3);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Selective convolutional descriptor aggregation"};
  app.require_subcommand(1);

  // train
  std::string config_path, manifest_path, out_path;
  Overrides overrides;
  auto* train = app.add_subcommand("train", "fit PCA, codebook and rotation on held-out images");
  train->add_option("--config", config_path, "JSON pipeline config (defaults if omitted)");
  train->add_option("--manifest", manifest_path, "manifest; only role=heldout images are used")->required();
  train->add_option("--out", out_path, "model file to write")->required();
  add_overrides(train, overrides);

  // index
  std::string model_path, index_path;
  auto* index = app.add_subcommand("index", "describe database images into an index file");
  index->add_option("--model", model_path)->required();
  index->add_option("--manifest", manifest_path)->required();
  index->add_option("--out", out_path)->required();

  // query
  std::string tensor_path, keypoints_path;
  std::size_t top = 0;
  auto* query = app.add_subcommand("query", "rank an index against one tensor");
  query->add_option("--model", model_path)->required();
  query->add_option("--index", index_path)->required();
  query->add_option("--tensor", tensor_path)->required();
  query->add_option("--keypoints", keypoints_path);
  query->add_option("--top", top, "print only the first N results (0 = all)");

  // evaluate
  auto* evaluate_cmd = app.add_subcommand("evaluate", "per-query AP and mAP over a manifest");
  evaluate_cmd->add_option("--model", model_path)->required();
  evaluate_cmd->add_option("--manifest", manifest_path)->required();

  // analyze
  std::string mask_name = "max";
  std::size_t bins = 40;
  std::uint64_t analyze_seed = 0;
  auto* analyze = app.add_subcommand("analyze", "mask retention and pairwise-similarity histogram");
  analyze->add_option("--manifest", manifest_path)->required();
  analyze->add_option("--mask", mask_name)->check(CLI::IsMember({"sift", "sum", "max", "none"}));
  analyze->add_option("--bins", bins)->check(CLI::PositiveNumber);
  analyze->add_option("--seed", analyze_seed, "pair sampling seed for very large feature sets");

  // bench
  int repetitions = 1;
  auto* bench_cmd = app.add_subcommand("bench", "per-stage describe timings");
  bench_cmd->add_option("--model", model_path)->required();
  bench_cmd->add_option("--manifest", manifest_path)->required();
  bench_cmd->add_option("--repetitions", repetitions);

  // synth
  SynthConfig synth_cfg;
  std::string grid = "16x16";
  auto* synth = app.add_subcommand("synth", "write a seeded synthetic dataset");
  synth->add_option("--classes", synth_cfg.classes);
  synth->add_option("--per-class", synth_cfg.images_per_class);
  synth->add_option("--grid", grid, "WxH");
  synth->add_option("--channels", synth_cfg.channels);
  synth->add_option("--burst-rate", synth_cfg.burst_rate);
  synth->add_option("--seed", synth_cfg.seed);
  synth->add_option("--patterns", synth_cfg.patterns_per_class);
  synth->add_option("--foreground", synth_cfg.foreground_locations);
  synth->add_option("--pattern-noise", synth_cfg.pattern_noise);
  synth->add_option("--background-noise", synth_cfg.background_noise_scale);
  synth->add_option("--heldout-classes", synth_cfg.heldout_classes);
  synth->add_option("--heldout-per-class", synth_cfg.heldout_per_class);
  synth->add_option("--out", out_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalid;
  }

  try {
    if (*train) {
      PipelineConfig cfg = config_path.empty() ? PipelineConfig{} : read_config(config_path);
      cfg = apply(cfg, overrides);
      const PipelineModel model = train_pipeline(cfg, read_manifest(manifest_path));
      write_model(model, out_path);
      std::printf("trained on %zu held-out images; descriptor dimension %lld\n", model.trained_ids.size(),
                  static_cast<long long>(model.descriptor_dim()));
    } else if (*index) {
      const PipelineModel model = read_model(model_path);
      const DatasetManifest manifest = read_manifest(manifest_path);
      check_heldout_discipline(model, manifest);
      const DescriptorIndex idx = build_index(model, manifest);
      write_index(idx, out_path);
      std::printf("indexed %zu images\n", idx.size());
    } else if (*query) {
      const PipelineModel model = read_model(model_path);
      const DescriptorIndex idx = read_index(index_path);
      const FeatureTensor t = read_tensor(tensor_path);
      std::optional<KeypointSet> kp;
      if (!keypoints_path.empty()) kp = read_keypoints(keypoints_path).keypoints;
      const RankedList ranked = rank(idx, describe_image(model, t, kp ? &*kp : nullptr));
      const std::size_t n = top == 0 ? ranked.ids.size() : std::min(top, ranked.ids.size());
      for (std::size_t i = 0; i < n; ++i) std::printf("%s\t%.6f\n", ranked.ids[i].c_str(), ranked.similarities[i]);
    } else if (*evaluate_cmd) {
      const PipelineModel model = read_model(model_path);
      const EvaluationReport rep = evaluate(model, read_manifest(manifest_path));
      for (const auto& r : rep.results) std::printf("%s\t%.4f\n", r.query_id.c_str(), r.ap);
      std::printf("mAP\t%.4f\n", rep.map);
    } else if (*analyze) {
      const DatasetManifest manifest = read_manifest(manifest_path);
      if (manifest.images.empty()) throw ValidationError("analyze: manifest has no images");
      const MaskKind kind = parse_mask_kind(mask_name);
      std::vector<double> mass(bins, 0.0), centers;
      double retained = 0.0, central = 0.0;
      std::size_t histogrammed = 0;
      for (const auto& e : manifest.images) {
        const ImageRecord img = load_image(e);
        const Mask m = compute_mask(kind, img.tensor, img.keypoints ? &*img.keypoints : nullptr);
        retained += retention(m, img.tensor);
        const FeatureSet fs = apply_mask(img.tensor, m);
        if (fs.size() < 2) continue;
        const CovarianceHistogram h = covariance_histogram(fs, bins, analyze_seed);
        for (std::size_t b = 0; b < bins; ++b) mass[b] += h.mass[b];
        centers = h.centers;
        central += h.central_fraction;
        ++histogrammed;
      }
      if (histogrammed == 0) throw ValidationError("analyze: no image keeps two or more features");
      std::printf("bin_center\tmass\n");
      for (std::size_t b = 0; b < bins; ++b) std::printf("%.6f\t%.6f\n", centers[b], mass[b] / histogrammed);
      std::printf("summary\tmask=%s\timages=%zu\tretention=%.4f\tcentral_fraction=%.4f\n", mask_name.c_str(),
                  manifest.images.size(), retained / manifest.images.size(), central / histogrammed);
    } else if (*bench_cmd) {
      const PipelineModel model = read_model(model_path);
      const DatasetManifest manifest = read_manifest(manifest_path);
      std::vector<ImageRecord> images = load_images(manifest, ImageRole::database);
      for (auto& q : load_images(manifest, ImageRole::query)) images.push_back(std::move(q));
      const BenchReport rep = bench(model, images, repetitions);
      std::printf("stage\tmean_ms\tmedian_ms\n");
      print_ms("mask", rep.mask);
      print_ms("reduce", rep.reduce);
      print_ms("embed", rep.embed);
      print_ms("pool", rep.pool);
      print_ms("postprocess", rep.postprocess);
      print_ms("total", rep.total);
      std::printf("summary\timages=%zu\trepetitions=%d\n", rep.images, rep.repetitions);
    } else if (*synth) {
      std::tie(synth_cfg.width, synth_cfg.height) = parse_grid(grid);
      const SynthDataset ds = generate_dataset(synth_cfg, out_path);
      std::printf("%s\n%s\n", ds.evaluation_path.string().c_str(), ds.heldout_path.string().c_str());
    }
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 1;
  }
  return 0;
}
