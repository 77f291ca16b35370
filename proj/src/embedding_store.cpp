#include "mgm/embedding_store.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <fstream>
#include <map>

#include "json.hpp"

namespace mgm {
namespace {

static_assert(std::endian::native == std::endian::little,
              "the store format is little-endian; add byte swapping for big-endian hosts");

constexpr char kMagic[4] = {'M', 'G', 'M', '1'};
constexpr std::size_t kHeaderBytes = 4 + 4 + 8 * 3 + 4;

template <typename T>
void put(std::string& buf, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  buf.append(bytes, sizeof(T));
}

template <typename T>
T get(const char* p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  return value;
}

bool is_sem(const Manifest& m) { return m.policy_id == policy::kSem; }

}  // namespace

std::string rfc3339_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void validate(const EmbeddingSet& set) {
  if (set.n_items < 1) throw ValidationError("n_items", "must be >= 1");
  // Sem stores one clean view per item and groups by label later.
  const std::size_t min_views = is_sem(set.manifest) ? 1 : 2;
  if (set.t_views < min_views) {
    throw ValidationError("t_views", "must be >= " + std::to_string(min_views));
  }
  if (set.dim < 1) throw ValidationError("dim", "must be >= 1");
  if (set.data.size() != set.n_items * set.t_views * set.dim) {
    throw ValidationError("data", "length " + std::to_string(set.data.size()) +
                                      " != n_items*t_views*dim");
  }
  for (std::size_t i = 0; i < set.data.size(); ++i) {
    if (!std::isfinite(set.data[i])) {
      throw ValidationError("data", "non-finite value at flat index " + std::to_string(i));
    }
  }
  const auto& labels = set.manifest.labels;
  if (labels && labels->size() != set.n_items) {
    throw ValidationError("labels", "length must equal n_items");
  }
  if (is_sem(set.manifest)) {
    if (!labels) throw ValidationError("labels", "required for policy Sem");
    if (set.t_views != 1) throw ValidationError("t_views", "policy Sem requires t_views = 1");
    std::map<std::int64_t, std::size_t> counts;
    for (auto l : *labels) ++counts[l];
    for (auto [label, count] : counts) {
      if (count < 2) {
        throw ValidationError("labels", "label group " + std::to_string(label) +
                                            " has fewer than 2 members");
      }
    }
  }
}

std::string manifest_to_json(const Manifest& m) {
  nlohmann::ordered_json j;
  j["model_id"] = m.model_id;
  j["policy_id"] = m.policy_id;
  if (m.labels) {
    j["labels"] = *m.labels;
  } else {
    j["labels"] = nullptr;
  }
  j["created"] = m.created;
  j["version"] = m.version;
  return j.dump();
}

Manifest manifest_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    Manifest m;
    m.model_id = j.at("model_id").get<std::string>();
    m.policy_id = j.at("policy_id").get<std::string>();
    if (j.contains("labels") && !j.at("labels").is_null()) {
      m.labels = j.at("labels").get<std::vector<std::int64_t>>();
    }
    m.created = j.value("created", std::string{});
    m.version = j.value("version", kFormatVersion);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw StoreError(StoreErrorKind::kManifestParse, std::string("manifest: ") + e.what());
  }
}

void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path) {
  validate(set);
  const std::string manifest = manifest_to_json(set.manifest);

  std::string buf;
  buf.reserve(kHeaderBytes + 4 + manifest.size() + set.data.size() * sizeof(float));
  buf.append(kMagic, 4);
  put<std::uint32_t>(buf, kFormatVersion);
  put<std::uint64_t>(buf, set.n_items);
  put<std::uint64_t>(buf, set.t_views);
  put<std::uint64_t>(buf, set.dim);
  put<std::uint32_t>(buf, 0);  // flags, reserved
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(manifest.size()));
  buf.append(manifest);
  buf.append(reinterpret_cast<const char*>(set.data.data()), set.data.size() * sizeof(float));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StoreError(StoreErrorKind::kIo, "cannot open for writing: " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw StoreError(StoreErrorKind::kIo, "write failed: " + path.string());
}

EmbeddingSet read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StoreError(StoreErrorKind::kIo, "cannot open: " + path.string());
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0) {
    throw StoreError(StoreErrorKind::kBadMagic, "bad magic in " + path.string());
  }
  if (buf.size() < kHeaderBytes + 4) {
    throw StoreError(StoreErrorKind::kTruncated, "header truncated in " + path.string());
  }
  const char* p = buf.data() + 4;
  const auto version = get<std::uint32_t>(p);
  if (version != kFormatVersion) {
    throw StoreError(StoreErrorKind::kVersionMismatch,
                     "unsupported version " + std::to_string(version) + " in " + path.string());
  }
  EmbeddingSet set;
  set.n_items = get<std::uint64_t>(p + 4);
  set.t_views = get<std::uint64_t>(p + 12);
  set.dim = get<std::uint64_t>(p + 20);
  const auto manifest_len = get<std::uint32_t>(p + 32);

  std::size_t offset = kHeaderBytes + 4;
  if (buf.size() < offset + manifest_len) {
    throw StoreError(StoreErrorKind::kTruncated, "manifest truncated in " + path.string());
  }
  set.manifest = manifest_from_json(buf.substr(offset, manifest_len));
  offset += manifest_len;

  if (set.n_items == 0 || set.t_views == 0 || set.dim == 0) validate(set);
  const std::size_t remaining = buf.size() - offset;
  const std::size_t max_values = remaining / sizeof(float);
  const bool fits = set.n_items <= max_values / set.t_views / set.dim;
  if (!fits || set.n_items * set.t_views * set.dim != max_values) {
    throw StoreError(StoreErrorKind::kTruncated, "payload size does not match header in " + path.string());
  }
  if (remaining % sizeof(float) != 0) {
    throw StoreError(StoreErrorKind::kTruncated, "trailing bytes after payload in " + path.string());
  }
  set.data.resize(max_values);
  std::memcpy(set.data.data(), buf.data() + offset, max_values * sizeof(float));
  validate(set);
  return set;
}

std::vector<ViewSet> view_sets(const EmbeddingSet& set) {
  validate(set);
  std::vector<ViewSet> out;
  const auto fill = [&](ViewSet& vs, std::size_t col, std::size_t item, std::size_t view) {
    const auto v = set.vector(item, view);
    for (std::size_t d = 0; d < set.dim; ++d) vs.members(d, col) = v[d];
    vs.sources.emplace_back(item, view);
  };

  if (is_sem(set.manifest)) {
    std::map<std::int64_t, std::vector<std::size_t>> groups;
    const auto& labels = *set.manifest.labels;
    for (std::size_t i = 0; i < set.n_items; ++i) groups[labels[i]].push_back(i);
    out.reserve(groups.size());
    for (const auto& [label, items] : groups) {
      ViewSet vs;
      vs.members.resize(set.dim, items.size());
      for (std::size_t c = 0; c < items.size(); ++c) fill(vs, c, items[c], 0);
      out.push_back(std::move(vs));
    }
    return out;
  }

  out.reserve(set.n_items);
  for (std::size_t i = 0; i < set.n_items; ++i) {
    ViewSet vs;
    vs.members.resize(set.dim, set.t_views);
    for (std::size_t t = 0; t < set.t_views; ++t) fill(vs, t, i, t);
    out.push_back(std::move(vs));
  }
  return out;
}

}  // namespace mgm
