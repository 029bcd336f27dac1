#pragma once

#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "aggrisk/dataset.hpp"
#include "aggrisk/tables.hpp"

namespace aggrisk {

enum class StatKind { Ep, Var, Tvar, Mean, Stats, Distribution };

/// Statistic requested by the query. For VAR/TVAR the number is kept as
/// written in the query text, where it denotes the tail probability
/// ("VAR(0.01)" asks for the 99%-confidence value-at-risk).
struct StatSpec {
  StatKind kind = StatKind::Mean;
  std::vector<double> ep_thresholds;  // Ep only; strictly increasing
  double tail = 0.0;                  // Var/Tvar only; in (0,1)

  bool operator==(const StatSpec&) const = default;
};

using Literal = std::variant<double, std::string>;

/// One IN-list predicate, e.g. `lob IN ('commercial')` or `layer_id IN (3,4)`.
struct InPredicate {
  std::string column;
  std::vector<Literal> values;

  bool operator==(const InPredicate&) const = default;
};

enum class PeriodKind { Season, Quarter, Month, Week };

/// Number of buckets a period kind splits the year into.
inline int period_buckets(PeriodKind kind) {
  switch (kind) {
    case PeriodKind::Season:
    case PeriodKind::Quarter:
      return 4;
    case PeriodKind::Month:
      return 12;
    case PeriodKind::Week:
      return 52;
  }
  return 4;
}

const char* period_name(PeriodKind kind);

struct GroupBySpec {
  bool by_region = false;
  bool by_peril = false;
  std::optional<PeriodKind> period;

  bool empty() const { return !by_region && !by_peril && !period; }
  bool operator==(const GroupBySpec&) const = default;
};

/// Parsed query AST.
struct Query {
  StatSpec stat;
  std::vector<InPredicate> layer_preds;  // columns: cob, lob, tob, layer_id, program_id
  std::vector<InPredicate> elt_preds;    // columns: region, peril, elt_id
  GroupBySpec group_by;
  bool secondary_uncertainty = false;
  std::vector<LayerId> marginal;  // candidate layer ids, <= 10, no duplicates

  bool operator==(const Query&) const = default;
};

/// Parse/compile failure with source location and, for syntax errors, the
/// token set that would have been accepted.
struct Diagnostic {
  enum class Kind { Lexical, Syntax, Semantic };

  Kind kind = Kind::Syntax;
  int line = 1;
  int column = 1;
  std::string message;
  std::vector<std::string> expected;

  /// "error: <msg>" plus the offending source line with a caret.
  std::string render(std::string_view source) const;
};

struct ParseResult {
  std::optional<Query> query;
  std::optional<Diagnostic> error;

  bool ok() const { return query.has_value(); }
};

/// Total: every input yields either an AST or a diagnostic, never a throw.
ParseResult parse_query(std::string_view text);

/// Canonical single-line form; parse_query(print_query(q)) reproduces q.
std::string print_query(const Query& query);

/// Layer filter (stage Q1): ids of layers satisfying every layer predicate,
/// ascending layer_id.
std::vector<LayerId> apply_layer_filter(const Query& query, std::span<const LayerRecord> layers);

/// ELT filter (stage Q2): ids covered by the selected layers and matching
/// every elt predicate, ascending, deduplicated.
std::vector<EltId> apply_elt_filter(const Query& query, std::span<const LayerId> selected_layers,
                                    std::span<const LayerRecord> layers,
                                    std::span<const EltMeta> pool);

/// Region/peril attributes of one event, restricted to what the grouping
/// needs (unneeded fields stay empty).
struct EventAttrs {
  std::string region;
  std::string peril;

  bool operator==(const EventAttrs&) const = default;
};

/// Event filter (stage Q3): event_id -> attributes needed by the grouping;
/// empty map when the grouping needs none.
std::unordered_map<EventId, EventAttrs> apply_event_filter(
    const Query& query, std::span<const EventCatalogRecord> catalogue);

/// Reducer statistic (stage Q5). Unlike StatSpec this carries the
/// *confidence* level: a query's VAR(x) compiles to confidence 1-x.
struct ReducerSpec {
  StatKind kind = StatKind::Mean;
  std::vector<double> ep_thresholds;
  double confidence = 0.0;

  bool operator==(const ReducerSpec&) const = default;
};

/// Compiled five-stage plan consumed by the engine.
struct QueryPlan {
  Query query;
  std::string query_text;          // canonical print of `query`
  std::vector<LayerId> layer_ids;  // Q1 result, ascending
  std::vector<EltId> elt_ids;      // Q2 result, ascending
  bool need_region = false;        // Q3 projection
  bool need_peril = false;
  GroupBySpec grouping;  // Q4
  ReducerSpec reducer;   // Q5
};

struct CompileResult {
  std::optional<QueryPlan> plan;
  std::optional<Diagnostic> error;

  bool ok() const { return plan.has_value(); }
};

/// Resolves the query against a dataset. Semantic failures (unknown marginal
/// candidate, candidate overlapping the base selection) come back as
/// diagnostics, not throws.
CompileResult compile_query(const Query& query, const Dataset& dataset);

}  // namespace aggrisk
