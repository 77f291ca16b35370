#pragma once

// On-disk embedding format and view-set access.
//
// File layout (all integers little-endian):
//   "MGM1" | version u32 | N u64 | T u64 | D u64 | flags u32
//   | manifest length u32 | manifest UTF-8 JSON
//   | N*T*D float32 values in (item, view, dim) order

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mgm/error.hpp"

namespace mgm {

inline constexpr std::uint32_t kFormatVersion = 1;

/// The five augmentation directions. Any other id is carried as a custom policy.
namespace policy {
inline constexpr const char* kSem = "Sem";
inline constexpr const char* kAugs = "Augs";
inline constexpr const char* kCrop = "Crop";
inline constexpr const char* kColorjit = "Colorjit";
inline constexpr const char* kRotate = "Rotate";
}  // namespace policy

struct Manifest {
  std::string model_id;
  std::string policy_id;
  std::optional<std::vector<std::int64_t>> labels;
  std::string created;  // RFC3339
  std::uint32_t version = kFormatVersion;

  bool operator==(const Manifest&) const = default;
};

/// Current UTC time formatted as RFC3339 ("2024-01-31T12:00:00Z").
std::string rfc3339_now();

struct EmbeddingSet {
  std::size_t n_items = 0;
  std::size_t t_views = 0;
  std::size_t dim = 0;
  std::vector<float> data;
  Manifest manifest;

  std::span<const float> vector(std::size_t item, std::size_t view) const {
    return {data.data() + (item * t_views + view) * dim, dim};
  }

  bool operator==(const EmbeddingSet&) const = default;
};

/// Throws ValidationError naming the offending field.
void validate(const EmbeddingSet& set);

/// Distinct failure modes of read_embeddings.
enum class StoreErrorKind { kIo, kBadMagic, kVersionMismatch, kTruncated, kManifestParse };

class StoreError : public InputError {
 public:
  StoreError(StoreErrorKind kind, const std::string& what) : InputError(what), kind_(kind) {}
  StoreErrorKind kind() const noexcept { return kind_; }

 private:
  StoreErrorKind kind_;
};

void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path);
EmbeddingSet read_embeddings(const std::filesystem::path& path);

/// Manifest <-> JSON text using the keys model_id, policy_id, labels, created, version.
std::string manifest_to_json(const Manifest& m);
Manifest manifest_from_json(const std::string& text);

/// A group of vectors over which one NNK graph is built.
struct ViewSet {
  /// One column per member, in double precision.
  Eigen::MatrixXd members;
  /// (item, view) of each column.
  std::vector<std::pair<std::size_t, std::size_t>> sources;

  std::size_t size() const { return sources.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(members.rows()); }
};

/// Non-Sem policies: one view-set per item holding its T views.
/// Sem: one view-set per distinct label (ascending), T must be 1.
std::vector<ViewSet> view_sets(const EmbeddingSet& set);

}  // namespace mgm
