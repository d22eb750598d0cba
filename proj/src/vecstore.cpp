#include "chainsight/vecstore.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "chainsight/records.hpp"
#include "chainsight/text.hpp"

namespace chainsight {

using records::json;

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = kFnvOffset;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= kFnvPrime;
  }
  return h;
}

constexpr std::string_view kIndexFormat = "chainsight-index";
constexpr int kIndexVersion = 1;

}  // namespace

std::string_view to_string(Modality modality) {
  switch (modality) {
    case Modality::Factor: return "factor";
    case Modality::News: return "news";
    case Modality::GraphNode: return "graph-node";
    case Modality::GraphPath: return "graph-path";
  }
  return "factor";
}

std::optional<Modality> parse_modality(std::string_view text) {
  for (auto m : {Modality::Factor, Modality::News, Modality::GraphNode, Modality::GraphPath}) {
    if (to_string(m) == text) return m;
  }
  return std::nullopt;
}

HashingEmbedder::HashingEmbedder(std::size_t dimension) : dimension_(dimension) {
  if (dimension_ == 0) throw std::invalid_argument("embedding dimension must be positive");
}

std::size_t HashingEmbedder::bucket(std::string_view token) const {
  return static_cast<std::size_t>(fnv1a(token) % dimension_);
}

Eigen::VectorXf HashingEmbedder::embed(std::string_view text) const {
  Eigen::VectorXf v = Eigen::VectorXf::Zero(static_cast<Eigen::Index>(dimension_));
  for (const auto& token : text::word_tokens(text)) {
    v[static_cast<Eigen::Index>(bucket(token))] += 1.0f;
  }
  const float norm = v.norm();
  if (norm > 0.0f) v /= norm;
  return v;
}

float cosine(const Eigen::Ref<const Eigen::VectorXf>& a, const Eigen::Ref<const Eigen::VectorXf>& b) {
  if (a.size() != b.size()) throw DimensionMismatch("cosine of vectors with different dimensions");
  const float na = a.norm();
  const float nb = b.norm();
  if (na == 0.0f || nb == 0.0f) return 0.0f;
  return std::clamp(a.dot(b) / (na * nb), -1.0f, 1.0f);
}

VectorIndex::VectorIndex(Modality modality, std::size_t dimension)
    : modality_(modality), vectors_(static_cast<Eigen::Index>(dimension), 0) {}

VectorIndex::VectorIndex(Modality modality, Eigen::MatrixXf vectors, std::vector<ContextShell> shells)
    : modality_(modality), vectors_(std::move(vectors)), shells_(std::move(shells)) {
  if (static_cast<std::size_t>(vectors_.cols()) != shells_.size()) {
    throw std::invalid_argument("index vectors and shells differ in count");
  }
  for (Eigen::Index c = 0; c < vectors_.cols(); ++c) {
    const float norm = vectors_.col(c).norm();
    // Already-unit columns are kept bit-for-bit so a reloaded index matches its dump.
    if (norm > 0.0f && std::abs(norm - 1.0f) > 1e-6f) vectors_.col(c) /= norm;
  }
}

std::vector<SearchHit> VectorIndex::search(const Eigen::Ref<const Eigen::VectorXf>& query,
                                           std::size_t k, const ShellFilter& filter) const {
  if (static_cast<std::size_t>(query.size()) != dimension()) {
    throw DimensionMismatch("query dimension " + std::to_string(query.size()) +
                            " does not match index dimension " + std::to_string(dimension()));
  }
  std::vector<SearchHit> hits;
  if (k == 0 || shells_.empty()) return hits;
  const float qnorm = query.norm();
  Eigen::VectorXf scores = Eigen::VectorXf::Zero(vectors_.cols());
  if (qnorm > 0.0f) scores = (vectors_.transpose() * query) / qnorm;
  hits.reserve(shells_.size());
  for (std::size_t i = 0; i < shells_.size(); ++i) {
    if (filter && !filter(shells_[i])) continue;
    hits.push_back({&shells_[i], std::clamp(scores[static_cast<Eigen::Index>(i)], -1.0f, 1.0f), i});
  }
  const auto by_rank = [](const SearchHit& a, const SearchHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.position < b.position;
  };
  const std::size_t keep = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(), by_rank);
  hits.resize(keep);
  return hits;
}

VectorIndex build_index(std::span<const ContextShell> shells, const Embedder& embedder,
                        Modality modality) {
  const auto d = static_cast<Eigen::Index>(embedder.dimension());
  Eigen::MatrixXf vectors(d, static_cast<Eigen::Index>(shells.size()));
  std::vector<ContextShell> stored;
  stored.reserve(shells.size());
  for (std::size_t i = 0; i < shells.size(); ++i) {
    Eigen::VectorXf v = embedder.embed(shells[i].text);
    if (v.size() != d) {
      throw DimensionMismatch("embedder returned dimension " + std::to_string(v.size()) +
                              ", expected " + std::to_string(d));
    }
    vectors.col(static_cast<Eigen::Index>(i)) = v;
    stored.push_back(shells[i]);
  }
  return VectorIndex(modality, std::move(vectors), std::move(stored));
}

std::vector<SearchHit> search(const VectorIndex& index, const Embedder& embedder,
                              std::string_view query, std::size_t k, const ShellFilter& filter) {
  return index.search(embedder.embed(query), k, filter);
}

void save_index(std::ostream& out, const VectorIndex& index) {
  out << json{{"format", kIndexFormat},
              {"version", kIndexVersion},
              {"modality", to_string(index.modality())},
              {"dimension", index.dimension()},
              {"count", index.size()}}
             .dump()
      << '\n';
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto& shell = index.shells()[i];
    const auto col = index.vectors().col(static_cast<Eigen::Index>(i));
    json entry = records::to_json(shell);
    entry["vector"] = std::vector<float>(col.data(), col.data() + col.size());
    out << entry.dump() << '\n';
  }
}

VectorIndex load_index(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("index dump is empty");
  const json header = json::parse(line);
  if (header.value("format", "") != kIndexFormat || header.value("version", 0) != kIndexVersion) {
    throw std::runtime_error("unsupported index dump format");
  }
  const auto modality = parse_modality(header.at("modality").get<std::string>());
  if (!modality) throw std::runtime_error("index dump has an unknown modality");
  const auto d = header.at("dimension").get<std::size_t>();
  const auto count = header.at("count").get<std::size_t>();
  Eigen::MatrixXf vectors(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(count));
  std::vector<ContextShell> shells;
  shells.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw std::runtime_error("index dump truncated");
    const json entry = json::parse(line);
    ContextShell shell = records::shell_from_json(entry);
    const auto values = entry.at("vector").get<std::vector<float>>();
    if (values.size() != d) throw DimensionMismatch("index entry has the wrong dimension");
    vectors.col(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::VectorXf>(values.data(), static_cast<Eigen::Index>(d));
    shells.push_back(std::move(shell));
  }
  return VectorIndex(*modality, std::move(vectors), std::move(shells));
}

// ---- timestamps ------------------------------------------------------------

namespace {

int digits(std::string_view s, std::size_t pos, std::size_t count) {
  if (pos + count > s.size()) throw std::invalid_argument("truncated timestamp");
  int value = 0;
  for (std::size_t i = pos; i < pos + count; ++i) {
    if (s[i] < '0' || s[i] > '9') throw std::invalid_argument("non-digit in timestamp");
    value = value * 10 + (s[i] - '0');
  }
  return value;
}

void expect(std::string_view s, std::size_t pos, std::string_view options) {
  if (pos >= s.size() || options.find(s[pos]) == std::string_view::npos) {
    throw std::invalid_argument("malformed timestamp '" + std::string(s) + "'");
  }
}

}  // namespace

Timestamp parse_rfc3339(std::string_view s) {
  using namespace std::chrono;
  const int year = digits(s, 0, 4);
  expect(s, 4, "-");
  const int month = digits(s, 5, 2);
  expect(s, 7, "-");
  const int day = digits(s, 8, 2);
  expect(s, 10, "Tt ");
  const int hour = digits(s, 11, 2);
  expect(s, 13, ":");
  const int minute = digits(s, 14, 2);
  expect(s, 16, ":");
  const int second = digits(s, 17, 2);
  std::size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
  }
  int offset_minutes = 0;
  expect(s, pos, "Zz+-");
  if (s[pos] == '+' || s[pos] == '-') {
    const int sign = s[pos] == '-' ? -1 : 1;
    const int oh = digits(s, pos + 1, 2);
    expect(s, pos + 3, ":");
    const int om = digits(s, pos + 4, 2);
    offset_minutes = sign * (oh * 60 + om);
    pos += 6;
  } else {
    pos += 1;
  }
  if (pos != s.size()) throw std::invalid_argument("trailing characters in timestamp");
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                           std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok() || hour > 23 || minute > 59 || second > 60) {
    throw std::invalid_argument("timestamp out of range '" + std::string(s) + "'");
  }
  return sys_days{ymd} + hours{hour} + minutes{minute} + seconds{second} - minutes{offset_minutes};
}

std::string format_rfc3339(Timestamp t) {
  using namespace std::chrono;
  const auto day = floor<days>(t);
  const year_month_day ymd{day};
  const hh_mm_ss hms{t - day};
  std::array<char, 64> buf{};
  std::snprintf(buf.data(), buf.size(), "%04d-%02u-%02uT%02ld:%02ld:%02ldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                static_cast<long>(hms.seconds().count()));
  return buf.data();
}

ShellFilter recency_filter(Timestamp cutoff) {
  return [cutoff](const ContextShell& shell) {
    const auto it = shell.metadata.find("timestamp");
    if (it == shell.metadata.end()) return false;
    try {
      return parse_rfc3339(it->second) >= cutoff;
    } catch (const std::invalid_argument&) {
      return false;
    }
  };
}

// ---- news ------------------------------------------------------------------

std::string_view to_string(NewsStream stream) {
  return stream == NewsStream::Macro ? "macro" : "stock-specific";
}

std::optional<NewsStream> parse_news_stream(std::string_view text) {
  if (text == "macro") return NewsStream::Macro;
  if (text == "stock-specific") return NewsStream::StockSpecific;
  return std::nullopt;
}

namespace {

std::size_t word_count(std::string_view s) {
  std::size_t count = 0;
  bool in_word = false;
  for (char c : s) {
    const bool space = c == ' ' || c == '\n' || c == '\t' || c == '\r';
    if (!space && !in_word) ++count;
    in_word = !space;
  }
  return count;
}

std::vector<std::string> paragraphs(std::string_view text) {
  std::vector<std::string> result;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find("\n\n", start);
    if (end == std::string_view::npos) end = text.size();
    auto para = text::trim(text.substr(start, end - start));
    if (!para.empty()) result.push_back(std::move(para));
    start = end + 2;
  }
  return result;
}

// Packs paragraphs into chunks of at most max_words words; a paragraph longer
// than the budget is cut at word boundaries.
std::vector<std::string> pack_paragraphs(std::string_view text, std::size_t max_words) {
  std::vector<std::string> chunks;
  std::string current;
  std::size_t current_words = 0;
  auto flush = [&] {
    if (!current.empty()) chunks.push_back(std::move(current));
    current.clear();
    current_words = 0;
  };
  for (const auto& para : paragraphs(text)) {
    const std::size_t words = word_count(para);
    if (words > max_words) {
      flush();
      std::istringstream stream(para);
      std::string word;
      while (stream >> word) {
        if (current_words == max_words) flush();
        if (!current.empty()) current += ' ';
        current += word;
        ++current_words;
      }
      flush();
      continue;
    }
    if (current_words + words > max_words) flush();
    if (!current.empty()) current += "\n\n";
    current += para;
    current_words += words;
  }
  flush();
  return chunks;
}

}  // namespace

std::vector<ContextShell> chunk_news(const NewsDocument& doc, const ChunkingOptions& options) {
  std::vector<std::string> pieces;
  if (doc.text.find('\f') != std::string::npos) {
    for (const auto& page : text::split(doc.text, '\f')) {
      auto trimmed = text::trim(page);
      if (!trimmed.empty()) pieces.push_back(std::move(trimmed));
    }
  } else {
    pieces = pack_paragraphs(doc.text, std::max<std::size_t>(options.max_words, 1));
  }
  std::vector<ContextShell> shells;
  shells.reserve(pieces.size());
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const int page = doc.page + static_cast<int>(i);
    ContextShell shell;
    shell.source = Modality::News;
    std::string header = doc.title.empty() ? std::string() : doc.title + "\n";
    header += doc.outlet + ", " + doc.timestamp + " (" + std::string(to_string(doc.stream)) +
              " news), page " + std::to_string(page) + ":\n";
    shell.text = header + pieces[i];
    shell.metadata = {{"outlet", doc.outlet},
                      {"timestamp", doc.timestamp},
                      {"stream", std::string(to_string(doc.stream))},
                      {"page", std::to_string(page)}};
    if (!doc.title.empty()) shell.metadata.emplace("title", doc.title);
    shells.push_back(std::move(shell));
  }
  return shells;
}

std::vector<NewsDocument> load_news_corpus(std::istream& in) {
  std::vector<NewsDocument> docs;
  std::string line;
  for (std::size_t record = 1; std::getline(in, line); ++record) {
    if (text::trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      for (const auto& [key, _] : j.items()) {
        if (key != "outlet" && key != "timestamp" && key != "stream" && key != "page" &&
            key != "text" && key != "title") {
          throw std::invalid_argument("unknown field '" + key + "'");
        }
      }
      NewsDocument doc;
      doc.outlet = j.at("outlet").get<std::string>();
      doc.timestamp = j.at("timestamp").get<std::string>();
      parse_rfc3339(doc.timestamp);
      const auto stream = parse_news_stream(j.at("stream").get<std::string>());
      if (!stream) throw std::invalid_argument("stream must be 'macro' or 'stock-specific'");
      doc.stream = *stream;
      doc.page = j.at("page").get<int>();
      doc.text = j.at("text").get<std::string>();
      doc.title = j.value("title", "");
      docs.push_back(std::move(doc));
    } catch (const std::exception& e) {
      throw std::runtime_error("news record " + std::to_string(record) + ": " + e.what());
    }
  }
  return docs;
}

std::vector<NewsDocument> load_news_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open news corpus '" + path + "'");
  return load_news_corpus(in);
}

}  // namespace chainsight
