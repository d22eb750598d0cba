#include <gtest/gtest.h>

#include <cctype>
#include <random>
#include <sstream>

#include "chainsight/traversal.hpp"
#include "chainsight/verbalizer.hpp"
#include "fixtures.hpp"

using namespace chainsight;
namespace t = chainsight::testing;

namespace {

const char* const kAppleSentence =
    "Apple generates 10% of its revenue from selling Desktop Computers, which spends 19% of its "
    "production budget on Integrated Circuits, 13% of which are produced in Shanghai, China.";

RiskPath apple_path() {
  return {{"apple", "desktop_computers", "integrated_circuits", "shanghai"},
          {{EdgeKind::Produces, Orientation::Forward, 10.0},
           {EdgeKind::HasInput, Orientation::Forward, 19.0},
           {EdgeKind::ManufacturedIn, Orientation::Forward, 13.0}}};
}

FactorCatalog two_factors() {
  return {{"Equity Beta",
           {"Equity Beta", "captures market risk beyond the baseline Market factor.",
            "portfolio tilts toward high-beta stocks, amplifying risk.",
            "portfolio tilts toward low-beta stocks, partially offsetting risk."}},
          {"Book-to-Price",
           {"Book-to-Price", "book value divided by market capitalization.",
            "stock may be undervalued or distressed.",
            "stock may be overvalued or considered a growth stock."}}};
}

}  // namespace

TEST(EdgePhrase, Goldens) {
  EXPECT_EQ(edge_phrase(EdgeKind::Produces, Orientation::Forward, "Apple", "Desktop Computers", 10.0),
            "Apple generates 10% of its revenue from selling Desktop Computers");
  EXPECT_EQ(edge_phrase(EdgeKind::HasInput, Orientation::Forward, "Desktop Computers", "Integrated Circuits", 19.0),
            "Desktop Computers spends 19% of its production budget on Integrated Circuits");
  EXPECT_EQ(edge_phrase(EdgeKind::ManufacturedIn, Orientation::Forward, "Integrated Circuits", "Shanghai", 13.0),
            "13% of Integrated Circuits are produced in Shanghai");
  EXPECT_EQ(edge_phrase(EdgeKind::Produces, Orientation::Forward, "Apple", "Desktop Computers", std::nullopt),
            "Apple generates revenue from selling Desktop Computers");
}

TEST(EdgePhrase, EveryEntryRendersCleanly) {
  for (auto kind : all_edge_kinds())
    for (auto o : {Orientation::Forward, Orientation::Inverse})
      for (std::optional<double> w : {std::optional<double>{}, std::optional<double>{12.5}}) {
        const auto text = edge_phrase(kind, o, "Alpha", "Beta", w);
        EXPECT_FALSE(has_unfilled_placeholder(text)) << text;
        EXPECT_NE(text.find("Alpha"), std::string::npos);
        EXPECT_NE(text.find("Beta"), std::string::npos);
        EXPECT_EQ(text.find("12.5%") != std::string::npos, w.has_value()) << text;
      }
}

TEST(RenderTemplate, Rules) {
  EXPECT_EQ(render_template("{src} to {dst}[ at {w}%]", "a", "b", 3.0), "a to b at 3%");
  EXPECT_EQ(render_template("{src} to {dst}[ at {w}%]", "a", "b", std::nullopt), "a to b");
  EXPECT_THROW(render_template("{src} {w}", "a", "b", 1.0), std::invalid_argument);
  EXPECT_THROW(render_template("{nope}", "a", "b", 1.0), std::invalid_argument);
}

TEST(PhraseTable, Overrides) {
  PhraseTable table = PhraseTable::defaults();
  std::istringstream in(
      R"({"kind":"Produces","orientation":"forward","template":"{src} sells {dst}[ ({w}%)]"})" "\n");
  table.load_overrides(in);
  EXPECT_EQ(edge_phrase(EdgeKind::Produces, Orientation::Forward, "A", "B", 5.0, table), "A sells B (5%)");
  std::istringstream bad(R"({"kind":"Produces","orientation":"forward","template":"{src} {w}"})" "\n");
  EXPECT_THROW(table.load_overrides(bad), std::invalid_argument);
}

TEST(VerbalizePath, AppleGolden) {
  const auto g = t::apple_graph();
  const auto shell = verbalize_path(apple_path(), g);
  EXPECT_EQ(shell.text, kAppleSentence);
  EXPECT_EQ(shell.source, Modality::GraphPath);
  EXPECT_EQ(shell.metadata.at("seed"), "apple");
}

TEST(VerbalizePath, SingleClauseAndMissingWeight) {
  const auto g = t::apple_graph();
  RiskPath one{{"apple", "desktop_computers"}, {{EdgeKind::Produces, Orientation::Forward, 10.0}}};
  EXPECT_EQ(verbalize_path(one, g).text, "Apple generates 10% of its revenue from selling Desktop Computers.");

  std::vector<Node> nodes = g.nodes();
  nodes.push_back({"computers", NodeKind::Industry, "Computer Manufacturing", {}});
  std::vector<Edge> edges = g.edges();
  edges.push_back({"desktop_computers", "computers", EdgeKind::BelongsTo, std::nullopt});
  KnowledgeGraph wider(nodes, edges);
  RiskPath two{{"apple", "desktop_computers", "computers"},
               {{EdgeKind::Produces, Orientation::Forward, 10.0},
                {EdgeKind::BelongsTo, Orientation::Forward, std::nullopt}}};
  EXPECT_EQ(verbalize_path(two, wider).text,
            "Apple generates 10% of its revenue from selling Desktop Computers, which belongs to the "
            "Computer Manufacturing industry.");
}

TEST(VerbalizePath, MismatchThrows) {
  const auto g = t::apple_graph();
  auto p = apple_path();
  p.steps[1].weight_percent = 20.0;
  EXPECT_THROW(verbalize_path(p, g), std::invalid_argument);
  p = apple_path();
  p.nodes.pop_back();
  EXPECT_THROW(verbalize_path(p, g), std::invalid_argument);
}

TEST(VerbalizePath, NamesAppearOnceInOrder) {
  std::mt19937_64 rng(12);
  const auto g = t::scale_free_supply_graph(20, rng);
  const auto table = salience(g);
  TraversalConfig c;
  c.fixed_hops = 3;
  c.max_paths = 0;
  const std::vector<SeedMatch> seeds{{"", "Company_2", 1.0}, {"", "Location_1", 1.0}};
  const auto paths = extract_paths(g, traverse(g, seeds, table, c), table, c);
  ASSERT_FALSE(paths.empty());
  for (const auto& p : paths) {
    const auto text = verbalize_path(p, g).text;
    EXPECT_FALSE(has_unfilled_placeholder(text));
    EXPECT_EQ(text, verbalize_path(p, g).text);
    std::size_t cursor = 0;
    for (const auto& id : p.nodes) {
      // Synthetic names end in a number; match "<name>" followed by a non-digit.
      const auto base = display_name(g.at(id));
      std::size_t at = text.find(base, cursor);
      while (at != std::string::npos && at + base.size() < text.size() &&
             std::isdigit(static_cast<unsigned char>(text[at + base.size()])))
        at = text.find(base, at + 1);
      ASSERT_NE(at, std::string::npos) << base << " in " << text;
      cursor = at + base.size();
    }
  }
}

TEST(DisplayName, StripsCompanySuffix) {
  EXPECT_EQ(display_name({"a", NodeKind::Company, "Apple Inc.", {}}), "Apple");
  EXPECT_EQ(display_name({"t", NodeKind::Company, "Tesla, Inc.", {}}), "Tesla");
  EXPECT_EQ(display_name({"s", NodeKind::Location, "Shanghai, China", {}}), "Shanghai, China");
}

TEST(NodeShell, AppleAndIsolated) {
  const auto g = t::apple_graph();
  const auto apple = render_node_shell(g.at("apple"), g).text;
  for (const char* needle : {"Apple Inc.", "Company", "AAPL", "Desktop Computers"})
    EXPECT_NE(apple.find(needle), std::string::npos) << needle;

  Node port = t::make_node(NodeKind::Location, 3);
  KnowledgeGraph lone({port}, {});
  const auto shell = render_node_shell(port, lone);
  EXPECT_EQ(shell.text.find("Linked to"), std::string::npos);
  EXPECT_NE(shell.text.find("-167"), std::string::npos);
  EXPECT_EQ(shell.metadata.at("node_id"), port.id);
}

TEST(NodeShell, IsomorphicNodesDifferOnlyBySubstitution) {
  Node a = t::make_node(NodeKind::Product, 1);
  Node b = a;
  b.id = "other";
  b.name = "Widget Frames";
  KnowledgeGraph ga({a}, {});
  KnowledgeGraph gb({b}, {});
  auto text = render_node_shell(a, ga).text;
  text.replace(text.find(a.name), a.name.size(), b.name);
  EXPECT_EQ(text, render_node_shell(b, gb).text);
}

TEST(FactorShell, AcmeTemplate) {
  FactorRecord r{"Acme Corp", "ACME", 4.2, {{"Equity Beta", 1.3}, {"Book-to-Price", -0.7}}, two_factors()};
  const auto shell = render_factor_shell(r);
  EXPECT_EQ(shell.text,
            "The position in the portfolio is associated with the security Acme Corp represented by the "
            "ticker ACME. This position constitutes 4.2% of the total portfolio. Each of the following "
            "factors is given a z-score (mean 0, sd 1) for this equity relative to all other equities."
            "\n\nAcme Corp Equity Beta: 1.3"
            "\nDescription: captures market risk beyond the baseline Market factor."
            "\nWhen High: portfolio tilts toward high-beta stocks, amplifying risk."
            "\nWhen Low: portfolio tilts toward low-beta stocks, partially offsetting risk."
            "\n\nAcme Corp Book-to-Price: -0.7"
            "\nDescription: book value divided by market capitalization."
            "\nWhen High: stock may be undervalued or distressed."
            "\nWhen Low: stock may be overvalued or considered a growth stock.");
  EXPECT_FALSE(has_unfilled_placeholder(shell.text));
  EXPECT_EQ(shell.metadata.at("ticker"), "ACME");
}

TEST(FactorShell, EdgeCases) {
  FactorRecord none{"Acme Corp", "ACME", 4.2, {}, {}};
  EXPECT_EQ(render_factor_shell(none).text.find("\n"), std::string::npos);

  FactorRecord zero{"Acme Corp", "ACME", 1.0, {{"Equity Beta", 0.0}}, two_factors()};
  const auto text = render_factor_shell(zero).text;
  EXPECT_NE(text.find("Acme Corp Equity Beta: 0\nDescription:"), std::string::npos);

  FactorRecord precise{"Acme Corp", "ACME", 1.0, {{"Equity Beta", 1.23456}}, two_factors()};
  EXPECT_NE(render_factor_shell(precise).text.find("Equity Beta: 1.235\n"), std::string::npos);

  FactorRecord missing{"Acme Corp", "ACME", 1.0, {{"Momentum", 0.5}}, two_factors()};
  EXPECT_THROW(render_factor_shell(missing), std::invalid_argument);
  FactorRecord heavy{"Acme Corp", "ACME", 130.0, {}, {}};
  EXPECT_THROW(render_factor_shell(heavy), std::invalid_argument);
}

TEST(FactorTable, ParsesCsv) {
  std::istringstream in("Security Name,Ticker,Weight,Equity Beta,Book-to-Price\n"
                        "Acme Corp,ACME,4.2,1.3,-0.7\n"
                        "\"Widgets, Ltd\",WDG,1.5,0.25,0.1\n");
  const auto rows = load_factor_table(in, two_factors());
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].security_name, "Widgets, Ltd");
  EXPECT_EQ(rows[0].z_scores[1], (std::pair<std::string, double>{"Book-to-Price", -0.7}));
  std::istringstream unknown("Security Name,Ticker,Weight,Momentum\nA,B,1,2\n");
  EXPECT_THROW(load_factor_table(unknown, two_factors()), std::invalid_argument);
}

TEST(Placeholders, Detection) {
  EXPECT_TRUE(has_unfilled_placeholder("x {src} y"));
  EXPECT_TRUE(has_unfilled_placeholder("[`Ticker']"));
  EXPECT_FALSE(has_unfilled_placeholder("plain [bracketed] text"));
}
