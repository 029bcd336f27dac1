#include "aggrisk/query.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <unordered_set>

#include "aggrisk/text.hpp"

namespace aggrisk {

namespace {

struct Token {
  enum class Kind { Ident, Number, String, LParen, RParen, Comma, End };

  Kind kind = Kind::End;
  std::string text;  // idents lowercased; strings without quotes
  std::string raw;
  double num = 0.0;
  int line = 1;
  int col = 1;
};

const char* token_name(Token::Kind kind) {
  switch (kind) {
    case Token::Kind::Ident: return "identifier";
    case Token::Kind::Number: return "number";
    case Token::Kind::String: return "string literal";
    case Token::Kind::LParen: return "'('";
    case Token::Kind::RParen: return "')'";
    case Token::Kind::Comma: return "','";
    case Token::Kind::End: return "end of query";
  }
  return "?";
}

struct LexResult {
  std::vector<Token> tokens;
  std::optional<Diagnostic> error;
};

LexResult lex(std::string_view text) {
  LexResult out;
  int line = 1;
  int col = 1;
  std::size_t i = 0;

  auto fail = [&](const std::string& msg) {
    out.error = Diagnostic{Diagnostic::Kind::Lexical, line, col, msg, {}};
  };
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      if (i < text.size() && text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };

  while (i < text.size()) {
    const char c = text[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      advance(1);
      continue;
    }

    Token tok;
    tok.line = line;
    tok.col = col;

    if (c == '(' || c == ')' || c == ',') {
      tok.kind = c == '(' ? Token::Kind::LParen : c == ')' ? Token::Kind::RParen : Token::Kind::Comma;
      tok.raw = std::string(1, c);
      advance(1);
      out.tokens.push_back(std::move(tok));
      continue;
    }

    if (c == '\'') {
      std::size_t end = i + 1;
      while (end < text.size() && text[end] != '\'' && text[end] != '\n') ++end;
      if (end >= text.size() || text[end] != '\'') {
        fail("unterminated string literal");
        return out;
      }
      tok.kind = Token::Kind::String;
      tok.text = std::string(text.substr(i + 1, end - i - 1));
      tok.raw = std::string(text.substr(i, end - i + 1));
      advance(end - i + 1);
      out.tokens.push_back(std::move(tok));
      continue;
    }

    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t end = i;
      while (end < text.size() && (std::isalnum(static_cast<unsigned char>(text[end])) ||
                                   text[end] == '_')) {
        ++end;
      }
      tok.kind = Token::Kind::Ident;
      tok.raw = std::string(text.substr(i, end - i));
      tok.text = to_lower(tok.raw);
      advance(end - i);
      out.tokens.push_back(std::move(tok));
      continue;
    }

    const bool starts_number = std::isdigit(static_cast<unsigned char>(c)) ||
                               (c == '.' && i + 1 < text.size() &&
                                std::isdigit(static_cast<unsigned char>(text[i + 1])));
    if (starts_number) {
      std::size_t end = i;
      while (end < text.size() && std::isdigit(static_cast<unsigned char>(text[end]))) ++end;
      if (end < text.size() && text[end] == '.') {
        ++end;
        while (end < text.size() && std::isdigit(static_cast<unsigned char>(text[end]))) ++end;
      }
      if (end < text.size() && (text[end] == 'e' || text[end] == 'E')) {
        std::size_t exp = end + 1;
        if (exp < text.size() && (text[exp] == '+' || text[exp] == '-')) ++exp;
        if (exp < text.size() && std::isdigit(static_cast<unsigned char>(text[exp]))) {
          end = exp;
          while (end < text.size() && std::isdigit(static_cast<unsigned char>(text[end]))) ++end;
        }
      }
      tok.raw = std::string(text.substr(i, end - i));
      if (!parse_double(tok.raw, tok.num)) {
        fail("invalid number '" + tok.raw + "'");
        return out;
      }
      tok.kind = Token::Kind::Number;
      advance(end - i);
      out.tokens.push_back(std::move(tok));
      continue;
    }

    fail(std::string("unexpected character '") + c + "'");
    return out;
  }

  Token end_tok;
  end_tok.kind = Token::Kind::End;
  end_tok.raw = "";
  end_tok.line = line;
  end_tok.col = col;
  out.tokens.push_back(std::move(end_tok));
  return out;
}

bool is_layer_column(const std::string& col) {
  return col == "cob" || col == "lob" || col == "tob" || col == "layer_id" ||
         col == "program_id";
}

bool is_elt_column(const std::string& col) {
  return col == "region" || col == "peril" || col == "elt_id";
}

bool is_numeric_column(const std::string& col) {
  return col == "layer_id" || col == "program_id" || col == "elt_id";
}

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  ParseResult run() {
    Query q;
    if (!expect_keyword("select")) return finish();
    if (!parse_stat(q)) return finish();
    if (!expect_keyword("from")) return finish();
    if (!expect_keyword("portfolio")) return finish();

    if (accept_keyword("where")) {
      if (!parse_predicates(q)) return finish();
    }
    if (accept_keyword("group")) {
      if (!expect_keyword("by")) return finish();
      if (!parse_group_keys(q)) return finish();
    }
    if (accept_keyword("with")) {
      if (!expect_keyword("secondary")) return finish();
      if (!expect_keyword("uncertainty")) return finish();
      q.secondary_uncertainty = true;
    }
    if (accept_keyword("marginal")) {
      if (!parse_marginal(q)) return finish();
    }
    if (peek().kind != Token::Kind::End) {
      syntax_error("unexpected trailing input", {"end of query"});
      return finish();
    }
    result_ = std::move(q);
    return finish();
  }

 private:
  ParseResult finish() {
    ParseResult out;
    if (error_) {
      out.error = std::move(error_);
    } else {
      out.query = std::move(result_);
    }
    return out;
  }

  const Token& peek() const { return tokens_[pos_]; }
  const Token& advance() { return tokens_[pos_++]; }

  bool accept_keyword(const char* kw) {
    if (peek().kind == Token::Kind::Ident && peek().text == kw) {
      ++pos_;
      return true;
    }
    return false;
  }

  bool expect_keyword(const char* kw) {
    if (accept_keyword(kw)) return true;
    syntax_error("expected '" + to_upper(kw) + "'", {to_upper(kw)});
    return false;
  }

  bool expect(Token::Kind kind) {
    if (peek().kind == kind) {
      ++pos_;
      return true;
    }
    syntax_error(std::string("expected ") + token_name(kind), {token_name(kind)});
    return false;
  }

  static std::string to_upper(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
  }

  void diag(Diagnostic::Kind kind, const std::string& msg, std::vector<std::string> expected) {
    if (error_) return;  // keep the first error
    const Token& t = peek();
    error_ = Diagnostic{kind, t.line, t.col, msg, std::move(expected)};
  }

  void syntax_error(const std::string& msg, std::vector<std::string> expected) {
    const Token& t = peek();
    const std::string got = t.kind == Token::Kind::End ? "end of query" : "'" + t.raw + "'";
    diag(Diagnostic::Kind::Syntax, msg + ", got " + got, std::move(expected));
  }

  void semantic_error(const std::string& msg) { diag(Diagnostic::Kind::Semantic, msg, {}); }

  bool parse_number(double& out) {
    if (peek().kind != Token::Kind::Number) {
      syntax_error("expected number", {"number"});
      return false;
    }
    out = advance().num;
    return true;
  }

  bool parse_stat(Query& q) {
    if (peek().kind != Token::Kind::Ident) {
      syntax_error("expected statistic", {"EP", "VAR", "TVAR", "MEAN", "STATS", "DISTRIBUTION"});
      return false;
    }
    const std::string name = advance().text;
    if (name == "mean") {
      q.stat.kind = StatKind::Mean;
      return true;
    }
    if (name == "stats") {
      q.stat.kind = StatKind::Stats;
      return true;
    }
    if (name == "distribution") {
      q.stat.kind = StatKind::Distribution;
      return true;
    }
    if (name == "ep") {
      q.stat.kind = StatKind::Ep;
      if (!expect(Token::Kind::LParen)) return false;
      double v;
      if (!parse_number(v)) return false;
      q.stat.ep_thresholds.push_back(v);
      while (peek().kind == Token::Kind::Comma) {
        ++pos_;
        if (!parse_number(v)) return false;
        q.stat.ep_thresholds.push_back(v);
      }
      if (!expect(Token::Kind::RParen)) return false;
      for (std::size_t i = 0; i < q.stat.ep_thresholds.size(); ++i) {
        if (q.stat.ep_thresholds[i] < 0.0) {
          semantic_error("EP thresholds must be nonnegative");
          return false;
        }
        if (i > 0 && q.stat.ep_thresholds[i] <= q.stat.ep_thresholds[i - 1]) {
          semantic_error("EP thresholds must be strictly increasing");
          return false;
        }
      }
      return true;
    }
    if (name == "var" || name == "tvar") {
      q.stat.kind = name == "var" ? StatKind::Var : StatKind::Tvar;
      if (!expect(Token::Kind::LParen)) return false;
      if (!parse_number(q.stat.tail)) return false;
      if (!expect(Token::Kind::RParen)) return false;
      if (!(q.stat.tail > 0.0 && q.stat.tail < 1.0)) {
        semantic_error("confidence out of range: " + to_upper(name) + " level must lie in (0,1)");
        return false;
      }
      return true;
    }
    semantic_error("unknown statistic '" + name + "'");
    return false;
  }

  bool parse_predicates(Query& q) {
    do {
      if (!parse_predicate(q)) return false;
    } while (accept_keyword("and"));
    return true;
  }

  bool parse_predicate(Query& q) {
    if (peek().kind != Token::Kind::Ident) {
      syntax_error("expected column name", {"identifier"});
      return false;
    }
    InPredicate pred;
    pred.column = advance().text;

    const bool layer_col = is_layer_column(pred.column);
    const bool elt_col = is_elt_column(pred.column);
    if (!layer_col && !elt_col) {
      semantic_error("unknown column '" + pred.column + "'");
      return false;
    }

    if (!expect_keyword("in")) return false;
    if (!expect(Token::Kind::LParen)) return false;
    if (!parse_literal(pred)) return false;
    while (peek().kind == Token::Kind::Comma) {
      ++pos_;
      if (!parse_literal(pred)) return false;
    }
    if (!expect(Token::Kind::RParen)) return false;

    (layer_col ? q.layer_preds : q.elt_preds).push_back(std::move(pred));
    return true;
  }

  bool parse_literal(InPredicate& pred) {
    const bool numeric = is_numeric_column(pred.column);
    if (peek().kind == Token::Kind::Number) {
      const Token& t = advance();
      if (!numeric) {
        semantic_error("column '" + pred.column + "' takes string literals");
        return false;
      }
      if (t.num < 1.0 || t.num != std::floor(t.num)) {
        semantic_error("column '" + pred.column + "' takes positive integer ids");
        return false;
      }
      pred.values.emplace_back(t.num);
      return true;
    }
    if (peek().kind == Token::Kind::String) {
      const Token& t = advance();
      if (numeric) {
        semantic_error("column '" + pred.column + "' takes numeric ids");
        return false;
      }
      pred.values.emplace_back(t.text);
      return true;
    }
    syntax_error("expected literal", {"number", "string literal"});
    return false;
  }

  bool parse_group_keys(Query& q) {
    do {
      if (peek().kind != Token::Kind::Ident) {
        syntax_error("expected group key", {"region", "peril", "season", "quarter", "month", "week"});
        return false;
      }
      const std::string key = advance().text;
      if (key == "region") {
        if (q.group_by.by_region) {
          semantic_error("duplicate group key 'region'");
          return false;
        }
        q.group_by.by_region = true;
      } else if (key == "peril") {
        if (q.group_by.by_peril) {
          semantic_error("duplicate group key 'peril'");
          return false;
        }
        q.group_by.by_peril = true;
      } else {
        PeriodKind kind;
        if (key == "season") {
          kind = PeriodKind::Season;
        } else if (key == "quarter") {
          kind = PeriodKind::Quarter;
        } else if (key == "month") {
          kind = PeriodKind::Month;
        } else if (key == "week") {
          kind = PeriodKind::Week;
        } else {
          semantic_error("unknown group key '" + key + "'");
          return false;
        }
        if (q.group_by.period) {
          semantic_error("at most one period group key is allowed");
          return false;
        }
        q.group_by.period = kind;
      }
    } while (peek().kind == Token::Kind::Comma && (++pos_, true));
    return true;
  }

  bool parse_marginal(Query& q) {
    if (!expect(Token::Kind::LParen)) return false;
    do {
      double v;
      if (!parse_number(v)) return false;
      if (v < 1.0 || v != std::floor(v) || v > 4294967295.0) {
        semantic_error("MARGINAL takes positive integer layer ids");
        return false;
      }
      const auto id = static_cast<LayerId>(v);
      if (std::find(q.marginal.begin(), q.marginal.end(), id) != q.marginal.end()) {
        semantic_error("duplicate candidate layer id " + std::to_string(id));
        return false;
      }
      q.marginal.push_back(id);
    } while (peek().kind == Token::Kind::Comma && (++pos_, true));
    if (!expect(Token::Kind::RParen)) return false;
    if (q.marginal.size() > 10) {
      semantic_error("at most 10 candidate layers are supported");
      return false;
    }
    return true;
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  std::optional<Query> result_;
  std::optional<Diagnostic> error_;
};

std::string quote(const std::string& s) { return "'" + s + "'"; }

std::string print_literal(const Literal& lit) {
  if (std::holds_alternative<double>(lit)) return format_double(std::get<double>(lit));
  return quote(std::get<std::string>(lit));
}

void print_predicates(std::string& out, const std::vector<InPredicate>& preds, bool& first) {
  for (const InPredicate& p : preds) {
    out += first ? " WHERE " : " AND ";
    first = false;
    out += p.column;
    out += " IN (";
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      if (i) out += ", ";
      out += print_literal(p.values[i]);
    }
    out += ")";
  }
}

bool literal_matches_string(const Literal& lit, const std::string& value) {
  return std::holds_alternative<std::string>(lit) && std::get<std::string>(lit) == value;
}

bool literal_matches_id(const Literal& lit, std::uint32_t id) {
  return std::holds_alternative<double>(lit) &&
         std::get<double>(lit) == static_cast<double>(id);
}

bool pred_matches_layer(const InPredicate& pred, const LayerRecord& layer) {
  for (const Literal& lit : pred.values) {
    if (pred.column == "cob" && literal_matches_string(lit, layer.cob)) return true;
    if (pred.column == "lob" && literal_matches_string(lit, layer.lob)) return true;
    if (pred.column == "tob" && literal_matches_string(lit, layer.tob)) return true;
    if (pred.column == "layer_id" && literal_matches_id(lit, layer.layer_id)) return true;
    if (pred.column == "program_id" && literal_matches_id(lit, layer.program_id)) return true;
  }
  return false;
}

bool pred_matches_elt(const InPredicate& pred, const EltMeta& meta) {
  for (const Literal& lit : pred.values) {
    if (pred.column == "region" && literal_matches_string(lit, meta.region)) return true;
    if (pred.column == "peril" && literal_matches_string(lit, meta.peril)) return true;
    if (pred.column == "elt_id" && literal_matches_id(lit, meta.elt_id)) return true;
  }
  return false;
}

}  // namespace

const char* period_name(PeriodKind kind) {
  switch (kind) {
    case PeriodKind::Season: return "season";
    case PeriodKind::Quarter: return "quarter";
    case PeriodKind::Month: return "month";
    case PeriodKind::Week: return "week";
  }
  return "?";
}

std::string Diagnostic::render(std::string_view source) const {
  std::string out = "error: ";
  out += message;
  if (!expected.empty()) {
    out += " (expected ";
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (i) out += ", ";
      out += expected[i];
    }
    out += ")";
  }
  out += '\n';

  // Offending line with a caret under the column.
  int current = 1;
  std::size_t start = 0;
  while (current < line) {
    const std::size_t pos = source.find('\n', start);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
    ++current;
  }
  const std::size_t end = source.find('\n', start);
  const std::string_view text =
      source.substr(start, end == std::string_view::npos ? source.size() - start : end - start);
  out += "  ";
  out += text;
  out += "\n  ";
  for (int i = 1; i < column; ++i) out += ' ';
  out += "^\n";
  return out;
}

ParseResult parse_query(std::string_view text) {
  LexResult lexed = lex(text);
  if (lexed.error) {
    ParseResult out;
    out.error = std::move(lexed.error);
    return out;
  }
  return Parser(std::move(lexed.tokens)).run();
}

std::string print_query(const Query& query) {
  std::string out = "SELECT ";
  switch (query.stat.kind) {
    case StatKind::Ep: {
      out += "EP(";
      for (std::size_t i = 0; i < query.stat.ep_thresholds.size(); ++i) {
        if (i) out += ", ";
        out += format_double(query.stat.ep_thresholds[i]);
      }
      out += ")";
      break;
    }
    case StatKind::Var:
      out += "VAR(" + format_double(query.stat.tail) + ")";
      break;
    case StatKind::Tvar:
      out += "TVAR(" + format_double(query.stat.tail) + ")";
      break;
    case StatKind::Mean:
      out += "MEAN";
      break;
    case StatKind::Stats:
      out += "STATS";
      break;
    case StatKind::Distribution:
      out += "DISTRIBUTION";
      break;
  }
  out += " FROM PORTFOLIO";

  bool first = true;
  print_predicates(out, query.layer_preds, first);
  print_predicates(out, query.elt_preds, first);

  if (!query.group_by.empty()) {
    out += " GROUP BY ";
    bool first_key = true;
    auto add = [&](const std::string& key) {
      if (!first_key) out += ", ";
      first_key = false;
      out += key;
    };
    if (query.group_by.by_region) add("region");
    if (query.group_by.by_peril) add("peril");
    if (query.group_by.period) add(period_name(*query.group_by.period));
  }
  if (query.secondary_uncertainty) out += " WITH SECONDARY UNCERTAINTY";
  if (!query.marginal.empty()) {
    out += " MARGINAL(";
    for (std::size_t i = 0; i < query.marginal.size(); ++i) {
      if (i) out += ", ";
      out += std::to_string(query.marginal[i]);
    }
    out += ")";
  }
  return out;
}

std::vector<LayerId> apply_layer_filter(const Query& query, std::span<const LayerRecord> layers) {
  std::vector<LayerId> out;
  for (const LayerRecord& layer : layers) {
    bool match = true;
    for (const InPredicate& pred : query.layer_preds) {
      if (!pred_matches_layer(pred, layer)) {
        match = false;
        break;
      }
    }
    if (match) out.push_back(layer.layer_id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<EltId> apply_elt_filter(const Query& query, std::span<const LayerId> selected_layers,
                                    std::span<const LayerRecord> layers,
                                    std::span<const EltMeta> pool) {
  std::unordered_set<LayerId> selected(selected_layers.begin(), selected_layers.end());
  std::unordered_set<EltId> covered;
  for (const LayerRecord& layer : layers) {
    if (!selected.contains(layer.layer_id)) continue;
    covered.insert(layer.elt_ids.begin(), layer.elt_ids.end());
  }

  std::set<EltId> out;
  for (const EltMeta& meta : pool) {
    if (!covered.contains(meta.elt_id)) continue;
    bool match = true;
    for (const InPredicate& pred : query.elt_preds) {
      if (!pred_matches_elt(pred, meta)) {
        match = false;
        break;
      }
    }
    if (match) out.insert(meta.elt_id);
  }
  return {out.begin(), out.end()};
}

std::unordered_map<EventId, EventAttrs> apply_event_filter(
    const Query& query, std::span<const EventCatalogRecord> catalogue) {
  std::unordered_map<EventId, EventAttrs> out;
  const bool need_region = query.group_by.by_region;
  const bool need_peril = query.group_by.by_peril;
  if (!need_region && !need_peril) return out;

  out.reserve(catalogue.size());
  for (const EventCatalogRecord& rec : catalogue) {
    EventAttrs attrs;
    if (need_region) attrs.region = rec.region;
    if (need_peril) attrs.peril = rec.peril;
    out.emplace(rec.event_id, std::move(attrs));
  }
  return out;
}

CompileResult compile_query(const Query& query, const Dataset& dataset) {
  QueryPlan plan;
  plan.query = query;
  plan.query_text = print_query(query);
  plan.layer_ids = apply_layer_filter(query, dataset.layers);
  plan.elt_ids = apply_elt_filter(query, plan.layer_ids, dataset.layers, dataset.elt_pool);
  plan.need_region = query.group_by.by_region;
  plan.need_peril = query.group_by.by_peril;
  plan.grouping = query.group_by;

  plan.reducer.kind = query.stat.kind;
  plan.reducer.ep_thresholds = query.stat.ep_thresholds;
  if (query.stat.kind == StatKind::Var || query.stat.kind == StatKind::Tvar) {
    plan.reducer.confidence = 1.0 - query.stat.tail;
  }

  CompileResult out;
  for (LayerId candidate : query.marginal) {
    if (dataset.find_layer(candidate) == nullptr) {
      out.error = Diagnostic{Diagnostic::Kind::Semantic, 1, 1,
                             "unknown layer id " + std::to_string(candidate) + " in MARGINAL",
                             {}};
      return out;
    }
    if (std::binary_search(plan.layer_ids.begin(), plan.layer_ids.end(), candidate)) {
      out.error = Diagnostic{Diagnostic::Kind::Semantic, 1, 1,
                             "candidate layer " + std::to_string(candidate) +
                                 " overlaps the base selection",
                             {}};
      return out;
    }
  }

  out.plan = std::move(plan);
  return out;
}

}  // namespace aggrisk
