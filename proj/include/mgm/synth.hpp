#pragma once

// Deterministic synthetic embedding sets with known geometry, used as test
// fixtures and for the bundled demo. All vectors are nonnegative combinations
// of orthonormal directions, so cosines stay in [0, 1] as they would for
// post-ReLU features.

#include <cstddef>
#include <cstdint>
#include <string>

#include "mgm/embedding_store.hpp"

namespace mgm {

enum class SynthKind {
  /// Every view of an item equals the item's base vector.
  kCollapsed,
  /// Views of an item sit near mutually orthogonal axes.
  kScattered,
  /// Views of an item span a random subspace of dimension `subspace_dim`.
  kSubspace,
  /// Augmentation displacements lie inside the item's semantic (class) span.
  kSimclrLike,
  /// Augmented views (and so their displacements) lie in a span orthogonal to
  /// every class span.
  kOrthogonalAugs,
};

/// Accepts collapsed, scattered, subspace-d, subspace-<n>, simclr-like, orthogonal-augs.
/// For subspace-<n> the dimension is written to *subspace_dim when non-null.
SynthKind parse_synth_kind(const std::string& text, std::size_t* subspace_dim = nullptr);
std::string to_string(SynthKind kind);

struct SynthParams {
  SynthKind kind = SynthKind::kCollapsed;
  std::string model_id = "synthetic";
  std::string policy_id = policy::kAugs;
  std::size_t n_items = 12;
  std::size_t t_views = 10;  // forced to 1 for Sem
  std::size_t dim = 16;
  std::size_t subspace_dim = 3;
  std::size_t n_classes = 3;
  /// Scales augmentation displacements; lets demo models differ in degree.
  double strength = 1.0;
  double noise = 1e-8;
  std::uint64_t seed = 0;
  std::string created = "1970-01-01T00:00:00Z";

  void validate() const;
};

/// Item labels: contiguous blocks of (nearly) equal size.
std::size_t synth_label(std::size_t item, std::size_t n_items, std::size_t n_classes);

/// Relative displacement amplitude used for each augmentation policy.
double policy_amplitude(const std::string& policy_id);

EmbeddingSet synthesize(const SynthParams& params);

}  // namespace mgm
