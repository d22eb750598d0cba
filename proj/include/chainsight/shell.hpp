#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace chainsight {

enum class Modality { Factor, News, GraphNode, GraphPath };

std::string_view to_string(Modality modality);
std::optional<Modality> parse_modality(std::string_view text);

/// Natural-language wrapper around one retrieved item plus its provenance.
struct ContextShell {
  std::string text;
  Modality source = Modality::Factor;
  std::map<std::string, std::string, std::less<>> metadata;

  bool operator==(const ContextShell&) const = default;
};

}  // namespace chainsight
