#pragma once

// End-to-end flow: mask -> PCA + l2 -> embed -> pool -> post-process.
//
// Training learns every parameter from held-out images only. Describing is
// a pure function of (model, tensor, keypoints).

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "selconv/aggregate.hpp"
#include "selconv/binary_io.hpp"
#include "selconv/codebook.hpp"
#include "selconv/embed.hpp"
#include "selconv/error.hpp"
#include "selconv/linalg.hpp"
#include "selconv/manifest.hpp"
#include "selconv/masking.hpp"
#include "selconv/postprocess.hpp"
#include "selconv/reduce.hpp"
#include "selconv/retrieval.hpp"
#include "selconv/tensor.hpp"

namespace selconv {

struct PipelineConfig {
  MaskKind mask = MaskKind::max;
  EmbeddingMethod embedding = EmbeddingMethod::temb;
  PoolMode pool = PoolMode::democratic;
  Index pca_d = 32;
  Index codebook_k = 20;
  double pn_alpha = 0.5;
  bool whiten = true;
  Index truncate_head = 128;
  int democratic_iters = kDemocraticDefaultIterations;
  Index ffaemb_m = kFfaembDefaultSupport;
  double ffaemb_mu = kFfaembDefaultMu;
  std::uint64_t seed = 0;

  Index aggregate_dim() const { return embedding_dim(embedding, pca_d, codebook_k); }
  // F-FAemb drops its leading d(d+1) aggregate entries before normalization.
  Index ffaemb_drop() const { return embedding == EmbeddingMethod::ffaemb ? pca_d * (pca_d + 1) : 0; }
  Index rotation_dim() const { return aggregate_dim() - ffaemb_drop(); }
  Index descriptor_dim() const { return rotation_dim() - truncate_head; }
  bool uses_gmm() const { return embedding == EmbeddingMethod::fv; }

  void validate() const {
    if (pca_d < 1) throw ParameterError("config: pca_d must be >= 1");
    if (codebook_k < 1) throw ParameterError("config: codebook_k must be >= 1");
    if (!(pn_alpha >= 0.0 && pn_alpha <= 1.0)) throw ParameterError("config: pn_alpha must lie in [0, 1]");
    if (democratic_iters < 0) throw ParameterError("config: democratic_iters must be >= 0");
    if (embedding == EmbeddingMethod::ffaemb) {
      if (ffaemb_m < 1 || ffaemb_m > codebook_k) throw ParameterError("config: ffaemb_m must satisfy 1 <= m <= k");
      if (ffaemb_mu < 0.0) throw ParameterError("config: ffaemb_mu must be >= 0");
      if (rotation_dim() < 1) throw ParameterError("config: F-FAemb truncation leaves no components");
    }
    if (truncate_head < 0 || truncate_head >= rotation_dim())
      throw ParameterError("config: truncate_head must be smaller than the rotation dimension " +
                           std::to_string(rotation_dim()));
  }

  EmbedParams embed_params() const { return {embedding, ffaemb_m, ffaemb_mu}; }

  /// Default framework (MAX mask, T-emb, democratic) at a final dimension
  /// of 512, 1024, 2048, 4096 or 8064.
  static PipelineConfig temb_preset(Index dimension) {
    PipelineConfig c;
    c.truncate_head = 128;
    switch (dimension) {
      case 512: c.pca_d = 32; c.codebook_k = 20; break;
      case 1024: c.pca_d = 64; c.codebook_k = 18; break;
      case 2048: c.pca_d = 64; c.codebook_k = 34; break;
      case 4096: c.pca_d = 64; c.codebook_k = 66; break;
      case 8064: c.pca_d = 128; c.codebook_k = 64; break;
      default: throw ParameterError("no T-emb preset for dimension " + std::to_string(dimension));
    }
    return c;
  }

  /// Embedding comparison settings, all yielding 4224 dimensions.
  static PipelineConfig comparison_preset(EmbeddingMethod m) {
    PipelineConfig c;
    c.embedding = m;
    c.truncate_head = 0;
    switch (m) {
      case EmbeddingMethod::fv: c.pca_d = 48; c.codebook_k = 44; break;
      case EmbeddingMethod::vlad: c.pca_d = 64; c.codebook_k = 66; break;
      case EmbeddingMethod::temb: c.pca_d = 64; c.codebook_k = 68; c.truncate_head = 128; break;
      case EmbeddingMethod::ffaemb: c.pca_d = 32; c.codebook_k = 10; break;
    }
    return c;
  }
};

inline nlohmann::json config_to_json(const PipelineConfig& c) {
  return {{"mask", to_string(c.mask)},
          {"embedding", to_string(c.embedding)},
          {"pool", to_string(c.pool)},
          {"pca_d", c.pca_d},
          {"codebook_k", c.codebook_k},
          {"pn_alpha", c.pn_alpha},
          {"whiten", c.whiten},
          {"truncate_head", c.truncate_head},
          {"democratic_iters", c.democratic_iters},
          {"ffaemb_m", c.ffaemb_m},
          {"ffaemb_mu", c.ffaemb_mu},
          {"seed", c.seed}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline PipelineConfig config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {"mask", "embedding", "pool", "pca_d", "codebook_k", "pn_alpha",
                                              "whiten", "truncate_head", "democratic_iters", "ffaemb_m",
                                              "ffaemb_mu", "seed"};
  if (!j.is_object()) throw FormatError("config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ValidationError("unknown config key: " + it.key());
  PipelineConfig c;
  try {
    if (j.contains("mask")) c.mask = parse_mask_kind(j.at("mask").get<std::string>());
    if (j.contains("embedding")) c.embedding = parse_embedding(j.at("embedding").get<std::string>());
    if (j.contains("pool")) c.pool = parse_pool_mode(j.at("pool").get<std::string>());
    if (j.contains("pca_d")) c.pca_d = j.at("pca_d").get<Index>();
    if (j.contains("codebook_k")) c.codebook_k = j.at("codebook_k").get<Index>();
    if (j.contains("pn_alpha")) c.pn_alpha = j.at("pn_alpha").get<double>();
    if (j.contains("whiten")) c.whiten = j.at("whiten").get<bool>();
    if (j.contains("truncate_head")) c.truncate_head = j.at("truncate_head").get<Index>();
    if (j.contains("democratic_iters")) c.democratic_iters = j.at("democratic_iters").get<int>();
    if (j.contains("ffaemb_m")) c.ffaemb_m = j.at("ffaemb_m").get<Index>();
    if (j.contains("ffaemb_mu")) c.ffaemb_mu = j.at("ffaemb_mu").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("malformed config: ") + ex.what());
  }
  c.validate();
  return c;
}

inline PipelineConfig read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("config is not valid JSON: ") + ex.what());
  }
  return config_from_json(j);
}

struct PipelineModel {
  PipelineConfig config;
  PcaModel pca;
  Codebook codebook;
  RotationModel rotation;
  std::vector<std::string> trained_ids;  // held-out images the model was fit on

  Index input_channels() const { return pca.input_dim(); }
  Index descriptor_dim() const { return rotation.output_dim(); }
};

/// One image in memory.
struct ImageRecord {
  std::string id;
  FeatureTensor tensor;
  std::optional<KeypointSet> keypoints;
};

inline ImageRecord load_image(const ImageEntry& e) {
  ImageRecord r;
  r.id = e.id;
  r.tensor = read_tensor(e.tensor_path);
  if (e.keypoints_path) r.keypoints = read_keypoints(*e.keypoints_path).keypoints;
  return r;
}

inline std::vector<ImageRecord> load_images(const DatasetManifest& m, ImageRole role) {
  std::vector<ImageRecord> out;
  for (const auto* e : m.with_role(role)) out.push_back(load_image(*e));
  return out;
}

inline FeatureSet masked_features(MaskKind kind, const FeatureTensor& t, const std::optional<KeypointSet>& kp) {
  return apply_mask(t, compute_mask(kind, t, kp ? &*kp : nullptr));
}

/// Aggregated vector before rotation: embed, pool, F-FAemb truncation and
/// power-law + l2.
inline Vector pooled_descriptor(const PipelineConfig& cfg, const Codebook& codebook, const Matrix& reduced) {
  const EmbeddedSet emb = embed_set(codebook, reduced, cfg.embed_params());
  Vector agg = aggregate(emb.vectors, cfg.pool, cfg.democratic_iters);
  if (cfg.embedding == EmbeddingMethod::ffaemb) agg = truncate_ffaemb(agg, cfg.pca_d);
  return power_law(agg, cfg.pn_alpha);
}

/// Fits PCA, codebook and rotation on held-out images.
inline PipelineModel train_pipeline(const PipelineConfig& config, std::span<const ImageRecord> heldout) {
  config.validate();
  if (heldout.size() < 2) throw ParameterError("train: need at least 2 held-out images");

  PipelineModel model;
  model.config = config;
  const std::uint32_t channels = heldout.front().tensor.channels();
  std::vector<FeatureSet> masked;
  masked.reserve(heldout.size());
  for (const auto& img : heldout) {
    if (img.tensor.channels() != channels)
      throw ValidationError("train: image " + img.id + " has " + std::to_string(img.tensor.channels()) +
                            " channels, expected " + std::to_string(channels));
    masked.push_back(masked_features(config.mask, img.tensor, img.keypoints));
    model.trained_ids.push_back(img.id);
  }
  const Matrix all = stack_features(masked);
  const Index needed = std::max(config.pca_d, 2 * config.codebook_k);
  if (all.cols() < needed)
    throw ParameterError("train/mask stage: " + std::to_string(all.cols()) + " masked features, need " +
                         std::to_string(needed));
  if (config.pca_d > all.rows())
    throw ParameterError("train/pca stage: pca_d exceeds channel count " + std::to_string(all.rows()));

  model.pca = fit_pca(all, config.pca_d);

  std::vector<Matrix> reduced;
  reduced.reserve(masked.size());
  for (const auto& fs : masked) reduced.push_back(reduce_features(model.pca, fs.vectors));
  Matrix stacked(config.pca_d, all.cols());
  Index col = 0;
  for (const auto& r : reduced) {
    stacked.middleCols(col, r.cols()) = r;
    col += r.cols();
  }
  try {
    if (config.uses_gmm())
      model.codebook = fit_gmm(stacked, config.codebook_k, config.seed);
    else
      model.codebook = fit_kmeans(stacked, config.codebook_k, config.seed);
  } catch (const ParameterError& e) {
    throw ParameterError(std::string("train/codebook stage: ") + e.what());
  }

  Matrix train(config.rotation_dim(), static_cast<Index>(reduced.size()));
  for (std::size_t i = 0; i < reduced.size(); ++i)
    train.col(static_cast<Index>(i)) = pooled_descriptor(config, model.codebook, reduced[i]);
  try {
    model.rotation = fit_rotation(train, config.whiten, config.truncate_head);
  } catch (const ParameterError& e) {
    throw ParameterError(std::string("train/rotation stage: ") + e.what());
  }
  return model;
}

/// Loads the manifest's held-out images and trains on them.
inline PipelineModel train_pipeline(const PipelineConfig& config, const DatasetManifest& manifest) {
  const auto heldout = load_images(manifest, ImageRole::heldout);
  if (heldout.empty()) throw ValidationError("train: manifest has no images with role heldout");
  return train_pipeline(config, heldout);
}

/// Wall time per stage, seconds.
struct StageTimes {
  double mask = 0.0;
  double reduce = 0.0;
  double embed = 0.0;
  double pool = 0.0;
  double postprocess = 0.0;

  double total() const { return mask + reduce + embed + pool + postprocess; }
};

inline Vector describe_image(const PipelineModel& model, const FeatureTensor& tensor, const KeypointSet* keypoints,
                             StageTimes* times) {
  using Clock = std::chrono::steady_clock;
  const auto& cfg = model.config;
  if (static_cast<Index>(tensor.channels()) != model.input_channels())
    throw ContractError("describe: tensor has " + std::to_string(tensor.channels()) + " channels, model expects " +
                        std::to_string(model.input_channels()));
  auto t0 = Clock::now();
  auto lap = [&](double StageTimes::*field) {
    const auto now = Clock::now();
    if (times) times->*field += std::chrono::duration<double>(now - t0).count();
    t0 = now;
  };

  const FeatureSet fs = apply_mask(tensor, compute_mask(cfg.mask, tensor, keypoints));
  lap(&StageTimes::mask);
  const Matrix reduced = reduce_features(model.pca, fs.vectors);
  lap(&StageTimes::reduce);
  const EmbeddedSet emb = embed_set(model.codebook, reduced, cfg.embed_params());
  lap(&StageTimes::embed);
  Vector agg = aggregate(emb.vectors, cfg.pool, cfg.democratic_iters);
  lap(&StageTimes::pool);
  if (cfg.embedding == EmbeddingMethod::ffaemb) agg = truncate_ffaemb(agg, cfg.pca_d);
  Vector out = apply_rotation(model.rotation, power_law(agg, cfg.pn_alpha));
  lap(&StageTimes::postprocess);
  return out;
}

/// Final l2-normalized descriptor of one image. Keypoints matter only for
/// the SIFT mask; without them the full grid is used.
inline Vector describe_image(const PipelineModel& model, const FeatureTensor& tensor,
                             const KeypointSet* keypoints = nullptr) {
  return describe_image(model, tensor, keypoints, nullptr);
}

inline Vector describe_image(const PipelineModel& model, const ImageRecord& img) {
  return describe_image(model, img.tensor, img.keypoints ? &*img.keypoints : nullptr);
}

/// Baseline: l2-normalized sum of every raw local feature.
inline Vector raw_sum_descriptor(const FeatureTensor& tensor) {
  const FeatureSet fs = apply_mask(tensor, full_mask(tensor));
  return l2_normalize(pool(fs.vectors, PoolMode::sum));
}

// ---------------------------------------------------------------------------
// Model file: "SCM1", uint32 version, then config, PCA, codebook, rotation and
// trained ids. Integers are uint32/uint64 LE, reals float64 LE.

inline constexpr char kModelMagic[4] = {'S', 'C', 'M', '1'};
inline constexpr std::uint32_t kModelVersion = 1;

namespace detail {

inline void put_vector(std::ostream& out, const Vector& v) {
  io::put_u64(out, static_cast<std::uint64_t>(v.size()));
  for (Index i = 0; i < v.size(); ++i) io::put_f64(out, v(i));
}

inline void put_matrix(std::ostream& out, const Matrix& m) {
  io::put_u64(out, static_cast<std::uint64_t>(m.rows()));
  io::put_u64(out, static_cast<std::uint64_t>(m.cols()));
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i) io::put_f64(out, m(i, j));
}

inline Index get_size(std::istream& in) {
  const std::uint64_t n = io::get_u64(in);
  if (n > (std::uint64_t{1} << 31)) throw CorruptionError("model: implausible array size");
  return static_cast<Index>(n);
}

inline Vector get_vector(std::istream& in) {
  Vector v(get_size(in));
  for (Index i = 0; i < v.size(); ++i) v(i) = io::get_f64(in);
  return v;
}

inline Matrix get_matrix(std::istream& in) {
  const Index r = get_size(in);
  const Index c = get_size(in);
  if (r * c > (Index{1} << 31)) throw CorruptionError("model: implausible matrix size");
  Matrix m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) m(i, j) = io::get_f64(in);
  return m;
}

}  // namespace detail

inline void write_model(const PipelineModel& model, std::ostream& out) {
  const auto& c = model.config;
  out.write(kModelMagic, 4);
  io::put_u32(out, kModelVersion);
  io::put_u32(out, static_cast<std::uint32_t>(c.mask));
  io::put_u32(out, static_cast<std::uint32_t>(c.embedding));
  io::put_u32(out, static_cast<std::uint32_t>(c.pool));
  io::put_u64(out, static_cast<std::uint64_t>(c.pca_d));
  io::put_u64(out, static_cast<std::uint64_t>(c.codebook_k));
  io::put_f64(out, c.pn_alpha);
  io::put_u32(out, c.whiten ? 1u : 0u);
  io::put_u64(out, static_cast<std::uint64_t>(c.truncate_head));
  io::put_u32(out, static_cast<std::uint32_t>(c.democratic_iters));
  io::put_u64(out, static_cast<std::uint64_t>(c.ffaemb_m));
  io::put_f64(out, c.ffaemb_mu);
  io::put_u64(out, c.seed);

  detail::put_vector(out, model.pca.mean);
  detail::put_matrix(out, model.pca.projection);
  detail::put_vector(out, model.pca.eigenvalues);

  if (const auto* g = std::get_if<GmmCodebook>(&model.codebook)) {
    io::put_u32(out, 1);
    detail::put_vector(out, g->weights);
    detail::put_matrix(out, g->means);
    detail::put_matrix(out, g->variances);
  } else {
    io::put_u32(out, 0);
    detail::put_matrix(out, std::get<KmeansCodebook>(model.codebook).centroids);
  }

  const auto& r = model.rotation;
  detail::put_vector(out, r.mean);
  detail::put_matrix(out, r.rotation);
  detail::put_vector(out, r.eigenvalues);
  io::put_u32(out, r.whiten ? 1u : 0u);
  io::put_f64(out, r.regularizer);
  io::put_u64(out, static_cast<std::uint64_t>(r.truncate_head));

  io::put_u32(out, static_cast<std::uint32_t>(model.trained_ids.size()));
  for (const auto& id : model.trained_ids) io::put_string(out, id);
}

inline PipelineModel read_model(std::istream& in) {
  char magic[4] = {};
  if (!in.read(magic, 4) || std::string_view(magic, 4) != std::string_view(kModelMagic, 4))
    throw FormatError("bad model magic");
  if (io::get_u32(in) != kModelVersion) throw FormatError("unsupported model version");
  PipelineModel m;
  auto& c = m.config;
  const auto mask = io::get_u32(in);
  const auto emb = io::get_u32(in);
  const auto pool_mode = io::get_u32(in);
  if (mask > 3 || emb > 3 || pool_mode > 3) throw CorruptionError("model: bad enum value");
  c.mask = static_cast<MaskKind>(mask);
  c.embedding = static_cast<EmbeddingMethod>(emb);
  c.pool = static_cast<PoolMode>(pool_mode);
  c.pca_d = static_cast<Index>(io::get_u64(in));
  c.codebook_k = static_cast<Index>(io::get_u64(in));
  c.pn_alpha = io::get_f64(in);
  c.whiten = io::get_u32(in) != 0;
  c.truncate_head = static_cast<Index>(io::get_u64(in));
  c.democratic_iters = static_cast<int>(io::get_u32(in));
  c.ffaemb_m = static_cast<Index>(io::get_u64(in));
  c.ffaemb_mu = io::get_f64(in);
  c.seed = io::get_u64(in);

  m.pca.mean = detail::get_vector(in);
  m.pca.projection = detail::get_matrix(in);
  m.pca.eigenvalues = detail::get_vector(in);

  const auto tag = io::get_u32(in);
  if (tag == 1) {
    GmmCodebook g;
    g.weights = detail::get_vector(in);
    g.means = detail::get_matrix(in);
    g.variances = detail::get_matrix(in);
    m.codebook = std::move(g);
  } else if (tag == 0) {
    m.codebook = KmeansCodebook{detail::get_matrix(in)};
  } else {
    throw CorruptionError("model: bad codebook tag");
  }

  auto& r = m.rotation;
  r.mean = detail::get_vector(in);
  r.rotation = detail::get_matrix(in);
  r.eigenvalues = detail::get_vector(in);
  r.whiten = io::get_u32(in) != 0;
  r.regularizer = io::get_f64(in);
  r.truncate_head = static_cast<Index>(io::get_u64(in));

  const std::uint32_t n = io::get_u32(in);
  for (std::uint32_t i = 0; i < n; ++i) m.trained_ids.push_back(io::get_string(in));

  try {
    c.validate();
  } catch (const ParameterError& e) {
    throw CorruptionError(std::string("model: ") + e.what());
  }
  const Index cb_dim = std::visit([](const auto& cb) { return cb.dim(); }, m.codebook);
  const Index cb_k = std::visit([](const auto& cb) { return cb.k(); }, m.codebook);
  if (m.pca.output_dim() != c.pca_d || m.pca.mean.size() != m.pca.input_dim() || cb_dim != c.pca_d ||
      cb_k != c.codebook_k || r.input_dim() != c.rotation_dim() || r.rotation.rows() != r.input_dim() ||
      r.truncate_head != c.truncate_head || (tag == 1) != c.uses_gmm())
    throw CorruptionError("model: component dimensions are inconsistent");
  return m;
}

inline void write_model(const PipelineModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  write_model(model, out);
  if (!out) throw IoError("write failed: " + path.string());
}

inline PipelineModel read_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model: " + path.string());
  return read_model(in);
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvaluationReport {
  std::vector<RetrievalResult> results;
  double map = 0.0;
};

using Describer = std::function<Vector(const ImageRecord&)>;

/// Indexes `database`, then ranks and scores every query in `queries`.
inline EvaluationReport evaluate_images(std::span<const ImageRecord> database, std::span<const ImageRecord> query_images,
                                        std::span<const QueryEntry> queries, const Describer& describe) {
  if (queries.empty()) throw ParameterError("evaluate: no queries");
  std::optional<DescriptorIndex> index;
  for (const auto& img : database) {
    Vector d = describe(img);
    if (!index) index.emplace(d.size());
    index->add(img.id, d);
  }
  if (!index) throw ParameterError("evaluate: empty database");
  std::map<std::string, const ImageRecord*> by_id;
  for (const auto& q : query_images) by_id[q.id] = &q;

  EvaluationReport report;
  for (const auto& q : queries) {
    auto it = by_id.find(q.query_id);
    if (it == by_id.end()) throw ValidationError("evaluate: no query image for " + q.query_id);
    const std::set<std::string> pos(q.positive_ids.begin(), q.positive_ids.end());
    const std::set<std::string> junk(q.junk_ids.begin(), q.junk_ids.end());
    report.results.push_back(evaluate_query(*index, q.query_id, describe(*it->second), pos, junk));
  }
  report.map = mean_ap(std::span<const RetrievalResult>(report.results));
  return report;
}

/// Refuses to evaluate on any image the model was trained on.
inline void check_heldout_discipline(const PipelineModel& model, const DatasetManifest& manifest) {
  const std::set<std::string> trained(model.trained_ids.begin(), model.trained_ids.end());
  for (const auto& e : manifest.images)
    if (trained.count(e.id)) throw ValidationError("evaluate: model was trained on image " + e.id);
}

inline DescriptorIndex build_index(const PipelineModel& model, const DatasetManifest& manifest) {
  DescriptorIndex index(model.descriptor_dim());
  for (const auto* e : manifest.with_role(ImageRole::database))
    index.add(e->id, describe_image(model, load_image(*e)));
  return index;
}

/// Database images are indexed; query images are those named by queries.
inline EvaluationReport evaluate(const PipelineModel& model, const DatasetManifest& manifest) {
  check_heldout_discipline(model, manifest);
  const auto database = load_images(manifest, ImageRole::database);
  std::vector<ImageRecord> query_images;
  for (const auto& q : manifest.queries) query_images.push_back(load_image(*manifest.find(q.query_id)));
  return evaluate_images(database, query_images, manifest.queries,
                         [&](const ImageRecord& img) { return describe_image(model, img); });
}

// ---------------------------------------------------------------------------
// Timing

struct StageStats {
  double mean = 0.0;    // seconds per image
  double median = 0.0;
};

struct BenchReport {
  std::size_t images = 0;
  int repetitions = 0;
  StageStats mask, reduce, embed, pool, postprocess, total;
};

/// Times describe_image per stage, excluding tensor loading.
inline BenchReport bench(const PipelineModel& model, std::span<const ImageRecord> images, int repetitions) {
  if (repetitions < 1) throw ParameterError("bench: repetitions must be >= 1");
  if (images.empty()) throw ParameterError("bench: no images");
  std::vector<StageTimes> samples;
  samples.reserve(images.size());
  for (const auto& img : images) {
    StageTimes t;
    for (int r = 0; r < repetitions; ++r)
      describe_image(model, img.tensor, img.keypoints ? &*img.keypoints : nullptr, &t);
    const double inv = 1.0 / repetitions;
    t.mask *= inv;
    t.reduce *= inv;
    t.embed *= inv;
    t.pool *= inv;
    t.postprocess *= inv;
    samples.push_back(t);
  }
  auto stats = [&](auto getter) {
    std::vector<double> v;
    v.reserve(samples.size());
    for (const auto& s : samples) v.push_back(getter(s));
    StageStats st;
    for (double x : v) st.mean += x;
    st.mean /= static_cast<double>(v.size());
    st.median = median(v);
    return st;
  };
  BenchReport rep;
  rep.images = images.size();
  rep.repetitions = repetitions;
  rep.mask = stats([](const StageTimes& s) { return s.mask; });
  rep.reduce = stats([](const StageTimes& s) { return s.reduce; });
  rep.embed = stats([](const StageTimes& s) { return s.embed; });
  rep.pool = stats([](const StageTimes& s) { return s.pool; });
  rep.postprocess = stats([](const StageTimes& s) { return s.postprocess; });
  rep.total = stats([](const StageTimes& s) { return s.total(); });
  return rep;
}

}  // namespace selconv
