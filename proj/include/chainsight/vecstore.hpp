#pragma once

// Per-modality embedding indices with exact cosine search.

#include <Eigen/Dense>

#include <chrono>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "chainsight/shell.hpp"

namespace chainsight {

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dimension() const = 0;
  virtual Eigen::VectorXf embed(std::string_view text) const = 0;
};

/// L2-normalized feature-hashed term frequencies over case-folded word
/// tokens. Empty (token-free) text maps to the zero vector.
class HashingEmbedder final : public Embedder {
 public:
  static constexpr std::size_t kDefaultDimension = 512;

  explicit HashingEmbedder(std::size_t dimension = kDefaultDimension);

  std::size_t dimension() const override { return dimension_; }
  Eigen::VectorXf embed(std::string_view text) const override;

  /// Bucket a token hashes into.
  std::size_t bucket(std::string_view token) const;

 private:
  std::size_t dimension_;
};

/// Cosine of two vectors; zero when either has zero norm.
float cosine(const Eigen::Ref<const Eigen::VectorXf>& a, const Eigen::Ref<const Eigen::VectorXf>& b);

class DimensionMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SearchHit {
  const ContextShell* shell = nullptr;
  float score = 0.0f;
  std::size_t position = 0;  // insertion order within the index
};

using ShellFilter = std::function<bool(const ContextShell&)>;

/// Exact cosine index over one modality. Immutable after construction.
class VectorIndex {
 public:
  VectorIndex(Modality modality, std::size_t dimension);
  VectorIndex(Modality modality, Eigen::MatrixXf vectors, std::vector<ContextShell> shells);

  Modality modality() const noexcept { return modality_; }
  std::size_t dimension() const noexcept { return static_cast<std::size_t>(vectors_.rows()); }
  std::size_t size() const noexcept { return shells_.size(); }
  bool empty() const noexcept { return shells_.empty(); }

  const std::vector<ContextShell>& shells() const noexcept { return shells_; }
  /// Unit-norm (or zero) column per entry.
  const Eigen::MatrixXf& vectors() const noexcept { return vectors_; }

  /// Top-k by cosine among entries accepted by `filter`, best first; ties
  /// keep insertion order. Throws DimensionMismatch for a wrong-sized query.
  std::vector<SearchHit> search(const Eigen::Ref<const Eigen::VectorXf>& query, std::size_t k,
                                const ShellFilter& filter = {}) const;

 private:
  Modality modality_;
  Eigen::MatrixXf vectors_;
  std::vector<ContextShell> shells_;
};

VectorIndex build_index(std::span<const ContextShell> shells, const Embedder& embedder,
                        Modality modality);

std::vector<SearchHit> search(const VectorIndex& index, const Embedder& embedder,
                              std::string_view query, std::size_t k,
                              const ShellFilter& filter = {});

/// Versioned text dump: a JSON header line, then one JSON line per entry.
void save_index(std::ostream& out, const VectorIndex& index);
VectorIndex load_index(std::istream& in);

// ---- timestamps and recency ------------------------------------------------

using Timestamp = std::chrono::sys_seconds;

/// RFC 3339 date-time ("2025-03-14T09:30:00Z", offsets and fractional
/// seconds accepted; fractions are truncated). Throws std::invalid_argument.
Timestamp parse_rfc3339(std::string_view text);
std::string format_rfc3339(Timestamp t);

/// Accepts shells whose "timestamp" metadata is at or after `cutoff`.
ShellFilter recency_filter(Timestamp cutoff);

// ---- news ------------------------------------------------------------------

enum class NewsStream { Macro, StockSpecific };

std::string_view to_string(NewsStream stream);
std::optional<NewsStream> parse_news_stream(std::string_view text);

struct NewsDocument {
  std::string outlet;
  std::string timestamp;  // RFC 3339
  NewsStream stream = NewsStream::Macro;
  int page = 1;
  std::string text;
  std::string title;
};

struct ChunkingOptions {
  std::size_t max_words = 400;
};

/// Splits on form-feed page markers when present, otherwise packs whole
/// paragraphs up to `max_words` (a single longer paragraph is split at the
/// word budget). Page numbers count up from the document's page.
std::vector<ContextShell> chunk_news(const NewsDocument& doc, const ChunkingOptions& options = {});

/// Line-delimited {outlet, timestamp, stream, page, text[, title]} records.
std::vector<NewsDocument> load_news_corpus(std::istream& in);
std::vector<NewsDocument> load_news_corpus_file(const std::string& path);

}  // namespace chainsight
