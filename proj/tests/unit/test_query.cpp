#include <algorithm>
#include <set>

#include <catch2/catch_amalgamated.hpp>

#include "aggrisk/generator.hpp"
#include "aggrisk/query.hpp"
#include "aggrisk/rng.hpp"
#include "helpers.hpp"

using namespace aggrisk;

namespace {

Query parse_ok(const std::string& sql) {
  const ParseResult r = parse_query(sql);
  INFO(sql);
  if (r.error) INFO(r.error->message);
  REQUIRE(r.ok());
  return *r.query;
}

Diagnostic parse_fail(const std::string& sql) {
  const ParseResult r = parse_query(sql);
  INFO(sql);
  REQUIRE_FALSE(r.ok());
  return *r.error;
}

// Linear-scan reference filter, kept deliberately naive.
std::vector<LayerId> brute_layer_filter(const Query& q, const std::vector<LayerRecord>& layers) {
  std::vector<LayerId> out;
  for (const LayerRecord& l : layers) {
    bool ok = true;
    for (const InPredicate& p : q.layer_preds) {
      bool any = false;
      for (const Literal& lit : p.values) {
        std::string value;
        if (p.column == "cob") value = l.cob;
        if (p.column == "lob") value = l.lob;
        if (p.column == "tob") value = l.tob;
        if (p.column == "layer_id" || p.column == "program_id") {
          const double want = std::get<double>(lit);
          const double have = p.column == "layer_id" ? l.layer_id : l.program_id;
          any = any || want == have;
          continue;
        }
        any = any || std::get<std::string>(lit) == value;
      }
      ok = ok && any;
    }
    if (ok) out.push_back(l.layer_id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("the example query parses into the expected AST") {
  const Query q = parse_ok(
      "SELECT VAR(0.01) FROM PORTFOLIO WHERE lob IN ('commercial') "
      "AND region IN ('FL') AND peril IN ('HU','FLD') GROUP BY season");
  CHECK(q.stat.kind == StatKind::Var);
  CHECK(q.stat.tail == 0.01);
  REQUIRE(q.layer_preds.size() == 1);
  CHECK(q.layer_preds[0].column == "lob");
  REQUIRE(q.layer_preds[0].values.size() == 1);
  CHECK(std::get<std::string>(q.layer_preds[0].values[0]) == "commercial");
  REQUIRE(q.elt_preds.size() == 2);
  CHECK(q.elt_preds[0].column == "region");
  CHECK(q.elt_preds[1].column == "peril");
  REQUIRE(q.elt_preds[1].values.size() == 2);
  CHECK(q.group_by.period == PeriodKind::Season);
  CHECK_FALSE(q.group_by.by_region);
  CHECK_FALSE(q.secondary_uncertainty);
  CHECK(q.marginal.empty());
}

TEST_CASE("a minimal query has no predicates or grouping") {
  const Query q = parse_ok("SELECT MEAN FROM PORTFOLIO");
  CHECK(q.stat.kind == StatKind::Mean);
  CHECK(q.layer_preds.empty());
  CHECK(q.elt_preds.empty());
  CHECK(q.group_by.empty());
}

TEST_CASE("keywords are case-insensitive") {
  const Query a = parse_ok("select mean from portfolio");
  const Query b = parse_ok("SeLeCt MEAN fRoM Portfolio");
  CHECK(a == b);
}

TEST_CASE("full-featured query round-trips") {
  const Query q = parse_ok(
      "SELECT EP(1000, 1e6, 2.5e6) FROM PORTFOLIO WHERE cob IN ('industrial') "
      "AND layer_id IN (1, 2, 3) AND region IN ('FL') GROUP BY region, peril, month "
      "WITH SECONDARY UNCERTAINTY MARGINAL(7, 9)");
  CHECK(q.stat.kind == StatKind::Ep);
  CHECK(q.stat.ep_thresholds == std::vector<double>{1000.0, 1e6, 2.5e6});
  CHECK(q.secondary_uncertainty);
  CHECK(q.marginal == std::vector<LayerId>{7, 9});
  CHECK(q.group_by.by_region);
  CHECK(q.group_by.by_peril);
  CHECK(q.group_by.period == PeriodKind::Month);
}

TEST_CASE("semantic errors are detected") {
  CHECK(parse_fail("SELECT VAR(1.5) FROM PORTFOLIO").kind == Diagnostic::Kind::Semantic);
  CHECK(parse_fail("SELECT VAR(0) FROM PORTFOLIO").kind == Diagnostic::Kind::Semantic);
  CHECK(parse_fail("SELECT TVAR(1) FROM PORTFOLIO").kind == Diagnostic::Kind::Semantic);
  CHECK(parse_fail("SELECT MEAN FROM PORTFOLIO WHERE color IN ('red')").kind ==
        Diagnostic::Kind::Semantic);
  CHECK(parse_fail("SELECT MEAN FROM PORTFOLIO WHERE lob IN (3)").kind ==
        Diagnostic::Kind::Semantic);
  CHECK(parse_fail("SELECT MEAN FROM PORTFOLIO WHERE layer_id IN ('x')").kind ==
        Diagnostic::Kind::Semantic);
  CHECK(parse_fail("SELECT EP(5, 3) FROM PORTFOLIO").kind == Diagnostic::Kind::Semantic);
  CHECK(parse_fail("SELECT MEAN FROM PORTFOLIO GROUP BY season, month").kind ==
        Diagnostic::Kind::Semantic);
  CHECK(parse_fail("SELECT MEAN FROM PORTFOLIO GROUP BY region, region").kind ==
        Diagnostic::Kind::Semantic);
  CHECK(parse_fail("SELECT MEAN FROM PORTFOLIO MARGINAL(1, 1)").kind ==
        Diagnostic::Kind::Semantic);
  CHECK(parse_fail("SELECT MEAN FROM PORTFOLIO MARGINAL(1,2,3,4,5,6,7,8,9,10,11)").kind ==
        Diagnostic::Kind::Semantic);
}

TEST_CASE("the example VAR(1.5) diagnostic names the confidence range") {
  const Diagnostic d = parse_fail("SELECT VAR(1.5) FROM PORTFOLIO");
  CHECK(d.message.find("confidence out of range") != std::string::npos);
}

TEST_CASE("syntax errors carry a position and expectations") {
  const Diagnostic d = parse_fail("SELECT VAR(0.01 FROM PORTFOLIO");
  CHECK(d.kind == Diagnostic::Kind::Syntax);
  CHECK(d.line == 1);
  CHECK(d.column == 17);  // at FROM, where ')' was expected
  REQUIRE_FALSE(d.expected.empty());
  CHECK(d.expected[0] == "')'");

  const std::string rendered = d.render("SELECT VAR(0.01 FROM PORTFOLIO");
  CHECK(rendered.find('^') != std::string::npos);
  CHECK(rendered.find("error:") != std::string::npos);
}

TEST_CASE("lexical errors are reported") {
  CHECK(parse_fail("SELECT MEAN FROM PORTFOLIO %").kind == Diagnostic::Kind::Lexical);
  CHECK(parse_fail("SELECT MEAN FROM PORTFOLIO WHERE lob IN ('open").kind ==
        Diagnostic::Kind::Lexical);
}

TEST_CASE("printing and reparsing reproduces the AST") {
  const char* queries[] = {
      "SELECT MEAN FROM PORTFOLIO",
      "SELECT STATS FROM PORTFOLIO GROUP BY week",
      "SELECT DISTRIBUTION FROM PORTFOLIO WHERE peril IN ('HU')",
      "SELECT VAR(0.01) FROM PORTFOLIO WHERE lob IN ('commercial') AND region IN ('FL') "
      "AND peril IN ('HU','FLD') GROUP BY season",
      "SELECT TVAR(0.05) FROM PORTFOLIO WHERE layer_id IN (3,4,5) WITH SECONDARY UNCERTAINTY",
      "SELECT EP(1000, 1e6) FROM PORTFOLIO GROUP BY region, peril, quarter MARGINAL(41, 42)",
  };
  for (const char* sql : queries) {
    const Query q = parse_ok(sql);
    const std::string printed = print_query(q);
    INFO(printed);
    const Query reparsed = parse_ok(printed);
    CHECK(q == reparsed);
    CHECK(print_query(reparsed) == printed);
  }
}

TEST_CASE("the parser is total over random token soup") {
  static const char* vocab[] = {"SELECT", "FROM",  "PORTFOLIO", "WHERE", "AND",      "IN",
                                "GROUP",  "BY",    "WITH",      "MEAN",  "VAR",      "EP",
                                "(",      ")",     ",",         "'FL'",  "0.5",      "lob",
                                "region", "season", "1e9",      "_x",    "'unterm", "%",
                                "9999999999999999999999"};
  SplitMix64 rng(31337);
  for (int i = 0; i < 100'000; ++i) {
    std::string sql;
    const int len = static_cast<int>(rng.next_below(12));
    for (int k = 0; k < len; ++k) {
      sql += vocab[rng.next_below(std::size(vocab))];
      sql += ' ';
    }
    const ParseResult r = parse_query(sql);
    REQUIRE((r.query.has_value() || r.error.has_value()));
  }
}

TEST_CASE("layer filter selects by line of business") {
  std::vector<LayerRecord> layers(2);
  layers[0].layer_id = 1;
  layers[0].lob = "commercial";
  layers[1].layer_id = 2;
  layers[1].lob = "marine";
  const Query q = parse_ok("SELECT MEAN FROM PORTFOLIO WHERE lob IN ('commercial')");
  CHECK(apply_layer_filter(q, layers) == std::vector<LayerId>{1});

  const Query all = parse_ok("SELECT MEAN FROM PORTFOLIO");
  CHECK(apply_layer_filter(all, layers) == std::vector<LayerId>{1, 2});
}

TEST_CASE("layer filter matches the brute-force scan on random portfolios") {
  SplitMix64 rng(808);
  for (int round = 0; round < 50; ++round) {
    const Dataset ds = generate_dataset(
        testutil::small_config(rng.next(), 1, 1, 20, 2, 10));

    static const char* preds[] = {
        "", " WHERE lob IN ('commercial','marine')", " WHERE cob IN ('energy')",
        " WHERE program_id IN (1)", " WHERE lob IN ('property') AND tob IN ('surplus')",
        " WHERE layer_id IN (3,5,7,9,11)"};
    for (const char* pred : preds) {
      const Query q = parse_ok(std::string("SELECT MEAN FROM PORTFOLIO") + pred);
      CHECK(apply_layer_filter(q, ds.layers) == brute_layer_filter(q, ds.layers));
    }
  }
}

TEST_CASE("elt filter intersects coverage with region and peril") {
  std::vector<LayerRecord> layers(1);
  layers[0].layer_id = 1;
  layers[0].elt_ids = {1, 2, 3};
  std::vector<EltMeta> pool = {{1, "JP", "EQ"}, {2, "FL", "HU"}, {3, "FL", "FLD"}, {4, "FL", "HU"}};
  const std::vector<LayerId> selected = {1};

  const Query q = parse_ok("SELECT MEAN FROM PORTFOLIO WHERE region IN ('FL')");
  CHECK(apply_elt_filter(q, selected, layers, pool) == std::vector<EltId>{2, 3});

  const Query no_pred = parse_ok("SELECT MEAN FROM PORTFOLIO");
  CHECK(apply_elt_filter(no_pred, selected, layers, pool) == std::vector<EltId>{1, 2, 3});
}

TEST_CASE("elt filter equals brute-force set algebra on random instances") {
  SplitMix64 rng(606);
  for (int round = 0; round < 30; ++round) {
    const Dataset ds = generate_dataset(testutil::small_config(rng.next(), 1, 1, 10, 3, 10));
    const Query q = parse_ok(
        "SELECT MEAN FROM PORTFOLIO WHERE lob IN ('commercial','property') "
        "AND region IN ('FL','JP') AND peril IN ('HU','EQ','FLD')");
    const auto selected = apply_layer_filter(q, ds.layers);
    const auto got = apply_elt_filter(q, selected, ds.layers, ds.elt_pool);

    std::set<EltId> covered;
    for (const LayerRecord& l : ds.layers) {
      if (std::find(selected.begin(), selected.end(), l.layer_id) == selected.end()) continue;
      covered.insert(l.elt_ids.begin(), l.elt_ids.end());
    }
    std::vector<EltId> expected;
    for (const EltMeta& m : ds.elt_pool) {
      const bool region_ok = m.region == "FL" || m.region == "JP";
      const bool peril_ok = m.peril == "HU" || m.peril == "EQ" || m.peril == "FLD";
      if (covered.contains(m.elt_id) && region_ok && peril_ok) expected.push_back(m.elt_id);
    }
    std::sort(expected.begin(), expected.end());
    CHECK(got == expected);
  }
}

TEST_CASE("filter composition is monotone") {
  const Dataset ds = generate_dataset(testutil::small_config(55, 1, 1, 30, 2, 10));
  const Query broad = parse_ok("SELECT MEAN FROM PORTFOLIO WHERE lob IN ('commercial','marine')");
  const Query narrow =
      parse_ok("SELECT MEAN FROM PORTFOLIO WHERE lob IN ('commercial','marine') "
               "AND cob IN ('energy','industrial')");
  const auto broad_ids = apply_layer_filter(broad, ds.layers);
  const auto narrow_ids = apply_layer_filter(narrow, ds.layers);
  CHECK(narrow_ids.size() <= broad_ids.size());
  CHECK(std::includes(broad_ids.begin(), broad_ids.end(), narrow_ids.begin(), narrow_ids.end()));
}

TEST_CASE("event filter projects only the needed attributes") {
  std::vector<EventCatalogRecord> catalogue = {{1, "FL", "HU"}, {2, "JP", "EQ"}};

  const Query by_region = parse_ok("SELECT MEAN FROM PORTFOLIO GROUP BY region");
  auto map = apply_event_filter(by_region, catalogue);
  REQUIRE(map.size() == 2);
  CHECK(map.at(1).region == "FL");
  CHECK(map.at(1).peril.empty());

  const Query ungrouped = parse_ok("SELECT MEAN FROM PORTFOLIO");
  CHECK(apply_event_filter(ungrouped, catalogue).empty());

  const Query by_period = parse_ok("SELECT MEAN FROM PORTFOLIO GROUP BY week");
  CHECK(apply_event_filter(by_period, catalogue).empty());

  const Query both = parse_ok("SELECT MEAN FROM PORTFOLIO GROUP BY region, peril");
  auto full = apply_event_filter(both, catalogue);
  REQUIRE(full.size() == catalogue.size());
  CHECK(full.at(2).peril == "EQ");
  CHECK(full.at(2).region == "JP");
}

TEST_CASE("compile resolves the plan and validates marginal candidates") {
  const Dataset ds = generate_dataset(testutil::small_config(42, 5, 3, 8, 2, 20));

  const Query q = parse_ok("SELECT MEAN FROM PORTFOLIO");
  const CompileResult ok = compile_query(q, ds);
  REQUIRE(ok.ok());
  CHECK(ok.plan->layer_ids.size() == 8);
  // Q2 output stays inside the union of the selected layers' coverage.
  std::set<EltId> covered;
  for (const LayerRecord& l : ds.layers) covered.insert(l.elt_ids.begin(), l.elt_ids.end());
  for (EltId e : ok.plan->elt_ids) CHECK(covered.contains(e));

  const Query unknown = parse_ok("SELECT MEAN FROM PORTFOLIO WHERE lob IN ('marine') MARGINAL(99)");
  const CompileResult bad = compile_query(unknown, ds);
  REQUIRE_FALSE(bad.ok());
  CHECK(bad.error->kind == Diagnostic::Kind::Semantic);

  const Query overlap = parse_ok("SELECT MEAN FROM PORTFOLIO MARGINAL(3)");
  const CompileResult bad2 = compile_query(overlap, ds);
  REQUIRE_FALSE(bad2.ok());
  CHECK(bad2.error->message.find("overlaps") != std::string::npos);
}
