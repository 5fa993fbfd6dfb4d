#pragma once

// Descriptor index, ranking and average precision with junk removal.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "selconv/binary_io.hpp"
#include "selconv/error.hpp"
#include "selconv/linalg.hpp"

namespace selconv {

inline constexpr double kIndexNormTolerance = 1e-5;

class DescriptorIndex {
 public:
  DescriptorIndex() = default;
  explicit DescriptorIndex(Index dim) : dim_(dim) {}

  void add(const std::string& id, const Vector& descriptor) {
    if (descriptor.size() != dim_) throw ContractError("index: descriptor dimension mismatch for " + id);
    if (std::abs(descriptor.norm() - 1.0) > kIndexNormTolerance)
      throw ValidationError("index: descriptor for " + id + " is not l2-normalized");
    if (!id_set_.insert(id).second) throw ValidationError("index: duplicate id " + id);
    ids_.push_back(id);
    data_.insert(data_.end(), descriptor.data(), descriptor.data() + descriptor.size());
  }

  Index dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  // One descriptor per row.
  Eigen::Map<const RowMatrix> matrix() const {
    return {data_.data(), static_cast<Index>(ids_.size()), dim_};
  }

 private:
  Index dim_ = 0;
  std::vector<std::string> ids_;
  std::unordered_set<std::string> id_set_;
  std::vector<double> data_;
};

struct RankedList {
  std::vector<std::string> ids;
  std::vector<double> similarities;  // non-increasing
};

/// Every indexed id by descending dot product; equal scores by ascending id.
inline RankedList rank(const DescriptorIndex& index, const Vector& query) {
  if (query.size() != index.dim()) throw ContractError("rank: query dimension mismatch");
  const Vector sims = index.matrix() * query;
  std::vector<std::size_t> order(index.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto& ids = index.ids();
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double sa = sims(static_cast<Index>(a));
    const double sb = sims(static_cast<Index>(b));
    if (sa != sb) return sa > sb;
    return ids[a] < ids[b];
  });
  RankedList out;
  out.ids.reserve(order.size());
  out.similarities.reserve(order.size());
  for (std::size_t i : order) {
    out.ids.push_back(ids[i]);
    out.similarities.push_back(sims(static_cast<Index>(i)));
  }
  return out;
}

/// AP after removing junk ids; positives never retrieved contribute zero.
inline double average_precision(std::span<const std::string> ranked, const std::set<std::string>& positives,
                                const std::set<std::string>& junk) {
  if (positives.empty()) throw ParameterError("average_precision: query has no positives");
  for (const auto& p : positives)
    if (junk.count(p)) throw ParameterError("average_precision: id is both positive and junk: " + p);
  std::size_t position = 0;
  std::size_t hits = 0;
  double sum = 0.0;
  for (const auto& id : ranked) {
    if (junk.count(id)) continue;
    ++position;
    if (positives.count(id)) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(position);
    }
  }
  return sum / static_cast<double>(positives.size());
}

struct RetrievalResult {
  std::string query_id;
  std::vector<std::string> ranked_ids;  // junk removed
  std::vector<double> similarities;
  double ap = 0.0;
};

/// Ranks a query and scores it; junk ids are dropped from the returned ranking.
inline RetrievalResult evaluate_query(const DescriptorIndex& index, const std::string& query_id, const Vector& query,
                                      const std::set<std::string>& positives, const std::set<std::string>& junk) {
  RankedList ranked = rank(index, query);
  RetrievalResult r;
  r.query_id = query_id;
  r.ap = average_precision(ranked.ids, positives, junk);
  for (std::size_t i = 0; i < ranked.ids.size(); ++i) {
    if (junk.count(ranked.ids[i])) continue;
    r.ranked_ids.push_back(std::move(ranked.ids[i]));
    r.similarities.push_back(ranked.similarities[i]);
  }
  return r;
}

inline double mean_ap(std::span<const double> aps) {
  if (aps.empty()) throw ParameterError("mean_ap: no queries");
  double s = 0.0;
  for (double a : aps) s += a;
  return s / static_cast<double>(aps.size());
}

inline double mean_ap(std::span<const RetrievalResult> results) {
  std::vector<double> aps;
  aps.reserve(results.size());
  for (const auto& r : results) aps.push_back(r.ap);
  return mean_ap(std::span<const double>(aps));
}

// Index file: "SCI1", uint32 version, uint32 dim, uint32 count, then per
// entry a length-prefixed id and dim float64 LE values.
inline constexpr char kIndexMagic[4] = {'S', 'C', 'I', '1'};
inline constexpr std::uint32_t kIndexVersion = 1;

inline void write_index(const DescriptorIndex& index, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(kIndexMagic, 4);
  io::put_u32(out, kIndexVersion);
  io::put_u32(out, static_cast<std::uint32_t>(index.dim()));
  io::put_u32(out, static_cast<std::uint32_t>(index.size()));
  for (std::size_t i = 0; i < index.size(); ++i) {
    io::put_string(out, index.ids()[i]);
    for (Index j = 0; j < index.dim(); ++j) io::put_f64(out, index.matrix()(static_cast<Index>(i), j));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

inline DescriptorIndex read_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open index: " + path.string());
  char magic[4] = {};
  if (!in.read(magic, 4) || std::string_view(magic, 4) != std::string_view(kIndexMagic, 4))
    throw FormatError("bad index magic");
  if (io::get_u32(in) != kIndexVersion) throw FormatError("unsupported index version");
  const auto dim = static_cast<Index>(io::get_u32(in));
  const std::uint32_t count = io::get_u32(in);
  DescriptorIndex index(dim);
  Vector v(dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string id = io::get_string(in);
    for (Index j = 0; j < dim; ++j) v(j) = io::get_f64(in);
    index.add(id, v);
  }
  return index;
}

}  // namespace selconv
