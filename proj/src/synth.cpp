#include "mgm/synth.hpp"

#include <cmath>
#include <functional>
#include <random>

#include <Eigen/Dense>

namespace mgm {
namespace {

constexpr std::size_t kSemanticDim = 2;
constexpr std::size_t kAugDim = 2;

// splitmix64 finalizer; derives independent stream seeds.
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
  return mix(mix(mix(mix(seed) ^ a) ^ b) ^ c);
}

std::uint64_t policy_hash(const std::string& p) {
  // FNV-1a, stable across platforms unlike std::hash.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : p) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

Eigen::MatrixXd random_orthonormal(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd g(rows, cols);
  for (Eigen::Index j = 0; j < g.cols(); ++j) {
    for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = normal(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(rows),
                                                                     static_cast<Eigen::Index>(cols));
  return q;
}

Eigen::VectorXd abs_normal(std::size_t n, std::mt19937_64& rng, double offset = 0.0) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = std::abs(normal(rng)) + offset;
  return v;
}

}  // namespace

SynthKind parse_synth_kind(const std::string& text, std::size_t* subspace_dim) {
  if (text == "collapsed") return SynthKind::kCollapsed;
  if (text == "scattered") return SynthKind::kScattered;
  if (text == "simclr-like") return SynthKind::kSimclrLike;
  if (text == "orthogonal-augs") return SynthKind::kOrthogonalAugs;
  if (text == "subspace-d" || text == "subspace") return SynthKind::kSubspace;
  if (text.rfind("subspace-", 0) == 0) {
    const std::string digits = text.substr(9);
    if (!digits.empty() && digits.find_first_not_of("0123456789") == std::string::npos) {
      if (subspace_dim) *subspace_dim = std::stoul(digits);
      return SynthKind::kSubspace;
    }
  }
  throw ValidationError("kind", "unknown synthetic geometry '" + text + "'");
}

std::string to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::kCollapsed: return "collapsed";
    case SynthKind::kScattered: return "scattered";
    case SynthKind::kSubspace: return "subspace-d";
    case SynthKind::kSimclrLike: return "simclr-like";
    case SynthKind::kOrthogonalAugs: return "orthogonal-augs";
  }
  return "unknown";
}

void SynthParams::validate() const {
  const bool sem = policy_id == policy::kSem;
  if (n_items < 1) throw ValidationError("n_items", "must be >= 1");
  if (dim < 1) throw ValidationError("dim", "must be >= 1");
  if (!sem && t_views < 2) throw ValidationError("t_views", "must be >= 2");
  if (n_classes < 1) throw ValidationError("n_classes", "must be >= 1");
  if (sem && n_items < 2 * n_classes) {
    throw ValidationError("n_items", "Sem needs at least 2 items per class");
  }
  if (!(strength > 0)) throw ValidationError("strength", "must be > 0");
  if (!(noise >= 0)) throw ValidationError("noise", "must be >= 0");
  switch (kind) {
    case SynthKind::kSubspace:
      if (subspace_dim < 1 || subspace_dim > dim) {
        throw ValidationError("subspace_dim", "must lie in [1, dim]");
      }
      break;
    case SynthKind::kScattered:
      if (!sem && t_views > dim) throw ValidationError("t_views", "scattered geometry needs t_views <= dim");
      break;
    case SynthKind::kCollapsed:
    case SynthKind::kSimclrLike:
    case SynthKind::kOrthogonalAugs:
      if (dim < kSemanticDim * n_classes + kAugDim) {
        throw ValidationError("dim", "needs at least 2 * n_classes + 2 dimensions");
      }
      break;
  }
}

std::size_t synth_label(std::size_t item, std::size_t n_items, std::size_t n_classes) {
  return item * n_classes / n_items;
}

double policy_amplitude(const std::string& policy_id) {
  if (policy_id == policy::kAugs) return 1.0;
  if (policy_id == policy::kCrop) return 0.6;
  if (policy_id == policy::kColorjit) return 0.35;
  if (policy_id == policy::kRotate) return 1.4;
  return 1.0;
}

EmbeddingSet synthesize(const SynthParams& p) {
  p.validate();
  const bool sem = p.policy_id == policy::kSem;
  const std::size_t views = sem ? 1 : p.t_views;
  const double amp = p.strength * policy_amplitude(p.policy_id);
  const auto d = static_cast<Eigen::Index>(p.dim);

  // Model-level structure shared by every policy of the same seed.
  std::mt19937_64 model_rng(stream(p.seed, 1));
  const Eigen::MatrixXd q = random_orthonormal(p.dim, p.dim, model_rng);
  const auto class_span = [&](std::size_t c) {
    return q.middleCols(static_cast<Eigen::Index>(kSemanticDim * c), kSemanticDim);
  };
  const auto aug_span = q.rightCols(kAugDim);

  std::vector<Eigen::MatrixXd> class_subspaces;
  if (p.kind == SynthKind::kSubspace) {
    for (std::size_t c = 0; c < p.n_classes; ++c) {
      std::mt19937_64 rng(stream(p.seed, 2, c));
      class_subspaces.push_back(random_orthonormal(p.dim, p.subspace_dim, rng));
    }
  }

  const auto base = [&](std::size_t item) -> Eigen::VectorXd {
    const std::size_t label = synth_label(item, p.n_items, p.n_classes);
    std::mt19937_64 rng(stream(p.seed, 3, item));
    switch (p.kind) {
      case SynthKind::kSubspace:
        return class_subspaces[label] * abs_normal(p.subspace_dim, rng);
      case SynthKind::kScattered: {
        Eigen::VectorXd v = q.col(static_cast<Eigen::Index>(item % p.dim));
        return v + 0.05 * q * abs_normal(p.dim, rng);
      }
      default:
        return class_span(label) * abs_normal(kSemanticDim, rng, 0.1);
    }
  };

  EmbeddingSet set;
  set.n_items = p.n_items;
  set.t_views = views;
  set.dim = p.dim;
  set.data.resize(p.n_items * views * p.dim);
  set.manifest.model_id = p.model_id;
  set.manifest.policy_id = p.policy_id;
  set.manifest.created = p.created;
  std::vector<std::int64_t> labels(p.n_items);
  for (std::size_t i = 0; i < p.n_items; ++i) {
    labels[i] = static_cast<std::int64_t>(synth_label(i, p.n_items, p.n_classes));
  }
  set.manifest.labels = std::move(labels);

  const std::uint64_t ph = policy_hash(p.policy_id);
  std::normal_distribution<double> normal;
  for (std::size_t i = 0; i < p.n_items; ++i) {
    const Eigen::VectorXd b = base(i);
    const std::size_t label = synth_label(i, p.n_items, p.n_classes);
    for (std::size_t t = 0; t < views; ++t) {
      std::mt19937_64 rng(stream(p.seed, ph, i, t + 1));
      Eigen::VectorXd v;
      if (sem) {
        v = b;
      } else {
        switch (p.kind) {
          case SynthKind::kCollapsed:
            v = b;
            break;
          case SynthKind::kScattered:
            v = q.col(static_cast<Eigen::Index>((i + t) % p.dim)) + 0.05 * q * abs_normal(p.dim, rng);
            break;
          case SynthKind::kSubspace: {
            std::mt19937_64 item_rng(stream(p.seed, ph, i));
            const Eigen::MatrixXd basis = random_orthonormal(p.dim, p.subspace_dim, item_rng);
            v = basis * abs_normal(p.subspace_dim, rng);
            break;
          }
          case SynthKind::kSimclrLike:
            v = b + amp * class_span(label) * abs_normal(kSemanticDim, rng);
            break;
          case SynthKind::kOrthogonalAugs:
            // No base component: any trace of it would put a class direction
            // into every neighbor span of three or more views.
            v = amp * aug_span * abs_normal(kAugDim, rng, 0.1);
            break;
        }
      }
      if (p.kind != SynthKind::kCollapsed && p.noise > 0) {
        for (Eigen::Index k = 0; k < d; ++k) v(k) += p.noise * normal(rng);
      }
      float* out = set.data.data() + (i * views + t) * p.dim;
      for (Eigen::Index k = 0; k < d; ++k) out[k] = static_cast<float>(v(k));
    }
  }
  return set;
}

}  // namespace mgm
