#pragma once

#include <cctype>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include "gensql/ast.hpp"
#include "gensql/error.hpp"

namespace gensql {

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

enum class Tok {
  End, Ident, Keyword, Int, Decimal, String,
  Plus, Minus, StarSym, Slash, Lt, Gt, EqSym,
  LParen, RParen, LBracket, RBracket, Comma, Dot, Colon,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;     // identifier text (original case) or keyword (upper case)
  double number = 0.0;  // Decimal
  std::int64_t integer = 0;
  Span span;
};

namespace detail {

inline const char* kKeywords[] = {
    "SELECT", "AS", "FROM", "WHERE", "JOIN", "UNION", "RENAME", "DEDUP", "DUPLICATE",
    "TIMES", "WITH", "GROUP", "BY", "AGGREGATING", "GENERATE", "UNDER", "LIMIT",
    "GENERATIVE", "GIVEN", "PROBABILITY", "DENSITY", "OF", "MUTUAL", "INFO", "EXCEPT",
    "AND", "OR", "NULL", "TRUE", "FALSE", "ORDER", "ASC", "DESC",
};

inline std::string upper(const std::string& s) {
  std::string u = s;
  for (char& c : u) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return u;
}

inline bool is_keyword(const std::string& up) {
  for (const char* k : kKeywords)
    if (up == k) return true;
  return false;
}

}  // namespace detail

inline std::vector<Token> tokenize(const std::string& text) {
  std::vector<Token> out;
  std::size_t i = 0, n = text.size();
  auto isidstart = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; };
  auto isid = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };

  while (i < n) {
    char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '-' && i + 1 < n && text[i + 1] == '-') {  // comment to end of line
      while (i < n && text[i] != '\n') ++i;
      continue;
    }
    Token t;
    t.span.begin = i;
    if (isidstart(c)) {
      std::size_t j = i;
      while (j < n && isid(text[j])) ++j;
      t.text = text.substr(i, j - i);
      std::string up = detail::upper(t.text);
      if (detail::is_keyword(up)) {
        t.kind = Tok::Keyword;
        t.text = up;
      } else {
        t.kind = Tok::Ident;
      }
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      bool decimal = false;
      while (j < n && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      if (j < n && text[j] == '.' && j + 1 < n &&
          std::isdigit(static_cast<unsigned char>(text[j + 1]))) {
        decimal = true;
        ++j;
        while (j < n && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      }
      if (j < n && (text[j] == 'e' || text[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < n && (text[k] == '+' || text[k] == '-')) ++k;
        if (k < n && std::isdigit(static_cast<unsigned char>(text[k]))) {
          decimal = true;
          j = k;
          while (j < n && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
        }
      }
      std::string num = text.substr(i, j - i);
      if (decimal) {
        t.kind = Tok::Decimal;
        t.number = std::strtod(num.c_str(), nullptr);
      } else {
        t.kind = Tok::Int;
        t.integer = std::strtoll(num.c_str(), nullptr, 10);
      }
      i = j;
    } else if (c == '"' || c == '\'') {
      char q = c;
      std::size_t j = i + 1;
      std::string s;
      while (j < n && text[j] != q) {
        if (text[j] == '\\' && j + 1 < n) {
          s += text[j + 1];
          j += 2;
        } else {
          s += text[j];
          ++j;
        }
      }
      if (j >= n) throw ParseError("unterminated string literal", Span{i, n});
      t.kind = Tok::String;
      t.text = s;
      i = j + 1;
    } else {
      switch (c) {
        case '+': t.kind = Tok::Plus; break;
        case '-': t.kind = Tok::Minus; break;
        case '*': t.kind = Tok::StarSym; break;
        case '/': t.kind = Tok::Slash; break;
        case '<': t.kind = Tok::Lt; break;
        case '>': t.kind = Tok::Gt; break;
        case '=': t.kind = Tok::EqSym; break;
        case '(': t.kind = Tok::LParen; break;
        case ')': t.kind = Tok::RParen; break;
        case '[': t.kind = Tok::LBracket; break;
        case ']': t.kind = Tok::RBracket; break;
        case ',': t.kind = Tok::Comma; break;
        case '.': t.kind = Tok::Dot; break;
        case ':': t.kind = Tok::Colon; break;
        default:
          throw ParseError(std::string("unexpected character '") + c + "'", Span{i, i + 1});
      }
      ++i;
    }
    t.span.end = i;
    out.push_back(std::move(t));
  }
  Token end;
  end.kind = Tok::End;
  end.span = Span{n, n};
  out.push_back(end);
  return out;
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

class Parser {
 public:
  explicit Parser(const std::string& text) : text_(text), toks_(tokenize(text)) {}

  Query parse_query() {
    Query q;
    std::size_t start = pos_;
    if (starts_scalar()) {
      q.root = parse_scalar();
    } else {
      try {
        q.root = parse_table();
      } catch (const ParseError& table_err) {
        // A parenthesized scalar also reaches here; retry on the other route.
        pos_ = start;
        try {
          q.root = parse_scalar();
        } catch (const ParseError&) {
          throw table_err;
        }
      }
    }
    parse_postfix_directives(q);
    expect_end();
    return q;
  }

  // Entry points used by tests.
  TablePtr parse_table_expr() {
    TablePtr t = parse_table();
    expect_end();
    return t;
  }
  ScalarPtr parse_scalar_expr() {
    ScalarPtr e = parse_scalar();
    expect_end();
    return e;
  }

 private:
  const std::string& text_;
  std::vector<Token> toks_;
  std::size_t pos_ = 0;

  const Token& cur() const { return toks_[pos_]; }
  const Token& peek(std::size_t k = 1) const {
    return toks_[pos_ + k < toks_.size() ? pos_ + k : toks_.size() - 1];
  }
  Token advance() { return toks_[pos_++]; }

  bool at_kw(const char* kw) const { return cur().kind == Tok::Keyword && cur().text == kw; }
  bool eat_kw(const char* kw) {
    if (at_kw(kw)) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect_kw(const char* kw) {
    if (!eat_kw(kw)) fail(std::string("expected ") + kw);
  }
  bool eat(Tok k) {
    if (cur().kind == k) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(Tok k, const char* what) {
    if (!eat(k)) fail(std::string("expected ") + what);
  }
  [[noreturn]] void fail(const std::string& msg) const {
    std::string got = cur().kind == Tok::End ? "end of input" : describe(cur());
    throw ParseError(msg + ", found " + got, cur().span);
  }
  static std::string describe(const Token& t) {
    switch (t.kind) {
      case Tok::Ident: return "identifier '" + t.text + "'";
      case Tok::Keyword: return "'" + t.text + "'";
      case Tok::Int:
      case Tok::Decimal: return "number";
      case Tok::String: return "string";
      default: return "'" + std::string(1, "  ??????+-*/<>=()[],.:"[static_cast<int>(t.kind)]) + "'";
    }
  }
  void expect_end() {
    if (cur().kind != Tok::End) fail("expected end of query");
  }
  Span span_from(std::size_t begin_tok) const {
    return Span::join(toks_[begin_tok].span, toks_[pos_ ? pos_ - 1 : 0].span);
  }

  bool starts_scalar() const {
    if (at_kw("PROBABILITY") || at_kw("MUTUAL")) return true;
    switch (cur().kind) {
      case Tok::Int:
      case Tok::Decimal:
      case Tok::String:
      case Tok::Minus:
        return true;
      default:
        break;
    }
    if (cur().kind == Tok::Ident) {
      std::string up = detail::upper(cur().text);
      if ((up == "LOG" || up == "EXP" || up == "SQRT") && peek().kind == Tok::LParen) return true;
    }
    return false;
  }

  // -- top-level ORDER BY / LIMIT ------------------------------------------

  void parse_postfix_directives(Query& q) {
    if (eat_kw("ORDER")) {
      expect_kw("BY");
      OrderBy ob;
      bool dir_before = true;
      if (eat_kw("ASC"))
        ob.ascending = true;
      else if (eat_kw("DESC"))
        ob.ascending = false;
      else
        dir_before = false;
      if (cur().kind != Tok::Ident) fail("expected a result column name in ORDER BY");
      ob.column = advance().text;
      if (!dir_before) {
        if (eat_kw("ASC"))
          ob.ascending = true;
        else if (eat_kw("DESC"))
          ob.ascending = false;
      }
      q.order_by = ob;
    }
    if (eat_kw("LIMIT")) {
      if (cur().kind != Tok::Int || cur().integer < 0)
        fail("expected a non-negative integer after LIMIT");
      q.limit = static_cast<std::uint64_t>(advance().integer);
    }
  }

  // -- table expressions ------------------------------------------------------
  //
  // t_expr   := t_join (UNION t_join)*
  // t_join   := t_post ((JOIN t_post) | (GENERATIVE JOIN model))*
  // t_post   := t_prim (WHERE scalar | DUPLICATE scalar TIMES)*
  // t_from   := like t_join/t_post but WHERE attaches to the enclosing SELECT.

  TablePtr parse_table() { return parse_table_union(); }

  TablePtr parse_table_union() {
    std::size_t b = pos_;
    TablePtr t = parse_table_join(true);
    while (eat_kw("UNION")) {
      TablePtr r = parse_table_join(true);
      t = mk_table({TableUnion{t, r}, span_from(b)});
    }
    return t;
  }

  TablePtr parse_table_join(bool allow_where) {
    std::size_t b = pos_;
    TablePtr t = parse_table_postfix(allow_where);
    for (;;) {
      if (at_kw("JOIN")) {
        ++pos_;
        TablePtr r = parse_table_postfix(allow_where);
        t = mk_table({TableJoin{t, r}, span_from(b)});
      } else if (at_kw("GENERATIVE")) {
        ++pos_;
        expect_kw("JOIN");
        ModelPtr m = parse_model();
        t = mk_table({TableGenJoin{t, m}, span_from(b)});
        // postfix ops may still follow a generative join
        t = parse_table_postfix_ops(t, b, allow_where);
      } else {
        break;
      }
    }
    return t;
  }

  TablePtr parse_table_postfix(bool allow_where) {
    std::size_t b = pos_;
    TablePtr t = parse_table_primary();
    return parse_table_postfix_ops(t, b, allow_where);
  }

  TablePtr parse_table_postfix_ops(TablePtr t, std::size_t b, bool allow_where) {
    for (;;) {
      if (allow_where && at_kw("WHERE")) {
        ++pos_;
        ScalarPtr e = parse_scalar();
        t = mk_table({TableWhere{t, e}, span_from(b)});
      } else if (at_kw("DUPLICATE")) {
        ++pos_;
        ScalarPtr e = parse_scalar_primary_chain();
        expect_kw("TIMES");
        t = mk_table({TableDuplicate{t, e}, span_from(b)});
      } else {
        break;
      }
    }
    return t;
  }

  TablePtr parse_table_primary() {
    std::size_t b = pos_;
    if (eat(Tok::LParen)) {
      TablePtr t = parse_table();
      expect(Tok::RParen, "')'");
      return t;
    }
    if (at_kw("SELECT")) return parse_select();
    if (at_kw("GENERATE")) {
      ++pos_;
      eat(Tok::StarSym);  // GENERATE * UNDER m
      expect_kw("UNDER");
      ModelPtr m = parse_model();
      expect_kw("LIMIT");
      ScalarPtr e = parse_scalar_primary_chain();
      return mk_table({TableGenerate{m, e}, span_from(b)});
    }
    if (at_kw("RENAME")) {
      ++pos_;
      TablePtr t = parse_table();
      expect_kw("AS");
      std::string id = expect_ident("an identifier after AS");
      return mk_table({TableRename{t, id}, span_from(b)});
    }
    if (at_kw("DEDUP")) {
      ++pos_;
      TablePtr t = parse_table_postfix(false);
      return mk_table({TableDedup{t}, span_from(b)});
    }
    if (at_kw("WITH")) return parse_with();
    if (at_kw("GROUP")) return parse_group_formal();
    if (cur().kind == Tok::Ident) {
      std::string id = advance().text;
      return mk_table({TableId{std::move(id)}, span_from(b)});
    }
    fail("expected a table expression");
  }

  std::string expect_ident(const char* what) {
    if (cur().kind != Tok::Ident) fail(std::string("expected ") + what);
    return advance().text;
  }

  TablePtr parse_with() {
    std::size_t b = pos_;
    expect_kw("WITH");
    // The bound expression is a table or a model; try the table route first
    // and fall back to a model when that does not land on AS.
    std::size_t save = pos_;
    std::optional<TablePtr> bound_t;
    std::optional<ModelPtr> bound_m;
    try {
      TablePtr t = parse_table();
      if (!at_kw("AS")) throw ParseError("expected AS", cur().span);
      bound_t = t;
    } catch (const ParseError&) {
      pos_ = save;
      bound_m = parse_model();
    }
    expect_kw("AS");
    std::string name = expect_ident("a name after AS");
    expect(Tok::Colon, "':' after WITH binding");
    TablePtr body = parse_table();
    return mk_table({TableWith{bound_t, bound_m, name, body}, span_from(b)});
  }

  TablePtr parse_group_formal() {
    std::size_t b = pos_;
    expect_kw("GROUP");
    TablePtr t = parse_table();
    expect_kw("BY");
    expect(Tok::LBracket, "'[' before the GROUP BY key list");
    std::vector<std::pair<ScalarPtr, std::string>> keys;
    if (cur().kind != Tok::RBracket) {
      do {
        ScalarPtr e = parse_scalar();
        std::string as;
        if (eat_kw("AS"))
          as = expect_ident("a column name after AS");
        else if (auto* ref = std::get_if<ScalarColRef>(&e->node))
          as = ref->ref.col;
        else
          fail("GROUP BY key expression needs AS <name>");
        keys.emplace_back(e, as);
      } while (eat(Tok::Comma));
    }
    expect(Tok::RBracket, "']' after the GROUP BY key list");
    expect_kw("AGGREGATING");
    std::vector<AggItem> aggs;
    do {
      aggs.push_back(parse_agg_item());
    } while (eat(Tok::Comma));
    return mk_table({TableGroupBy{t, std::move(keys), std::move(aggs)}, span_from(b)});
  }

  std::optional<AggKind> agg_kind_of(const Token& t) const {
    if (t.kind != Tok::Ident && t.kind != Tok::Keyword) return std::nullopt;
    std::string up = detail::upper(t.text);
    if (up == "SUM") return AggKind::Sum;
    if (up == "AVG") return AggKind::Avg;
    if (up == "MAX") return AggKind::Max;
    if (up == "MIN") return AggKind::Min;
    if (up == "COUNT") return AggKind::Count;
    if (up == "COUNT_DISTINCT") return AggKind::CountDistinct;
    if (up == "CONCAT") return AggKind::Concat;
    return std::nullopt;
  }

  AggItem parse_agg_item() {
    std::size_t b = pos_;
    auto kind = agg_kind_of(cur());
    if (!kind || peek().kind != Tok::LParen) fail("expected an aggregate call");
    ++pos_;
    expect(Tok::LParen, "'('");
    ScalarPtr arg;
    if (cur().kind == Tok::StarSym && *kind == AggKind::Count) {
      ++pos_;
      arg = sc_const(Value::integer(1), cur().span);
    } else {
      arg = parse_scalar();
    }
    expect(Tok::RParen, "')'");
    std::string as;
    if (eat_kw("AS"))
      as = expect_ident("a column name after AS");
    else {
      as = detail::upper(agg_name(*kind));
      for (char& c : as) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return AggItem{*kind, arg, as, span_from(b)};
  }

  TablePtr parse_select() {
    std::size_t b = pos_;
    expect_kw("SELECT");
    std::vector<SelectItem> items;
    std::vector<AggItem> agg_items;
    std::vector<std::size_t> item_order;  // positions of non-agg items
    do {
      if (at_kw("FROM")) break;  // tolerate trailing comma, seen in corpus queries
      std::size_t ib = pos_;
      SelectItem item;
      if (eat(Tok::StarSym)) {
        item.kind = SelectItem::Kind::Star;
        while (at_kw("EXCEPT")) {
          ++pos_;
          item.except.push_back(parse_colname());
        }
      } else if (agg_kind_of(cur()) && peek().kind == Tok::LParen) {
        agg_items.push_back(parse_agg_item());
        continue;
      } else {
        item.kind = SelectItem::Kind::Expr;
        item.expr = parse_scalar();
        if (eat_kw("AS")) item.alias = expect_ident("a column name after AS");
      }
      item.span = span_from(ib);
      items.push_back(std::move(item));
      item_order.push_back(items.size() - 1);
    } while (eat(Tok::Comma));
    expect_kw("FROM");
    TablePtr from = parse_table_join(false);
    if (eat_kw("AS")) {
      std::string id = expect_ident("an identifier after AS");
      from = mk_table({TableRename{from, id}, from->span});
    }

    // Legacy GROUP BY tail: rewritten to the formal GROUP ... BY ... AGGREGATING.
    if (at_kw("GROUP")) {
      ++pos_;
      expect_kw("BY");
      std::vector<ScalarPtr> group_keys;
      do {
        // key list items bind below AND so "GROUP BY a AND b" means two keys
        group_keys.push_back(parse_scalar_cmp());
      } while (eat(Tok::Comma) || eat_kw("AND"));
      return rewrite_legacy_group_by(from, items, agg_items, group_keys, span_from(b));
    }
    if (!agg_items.empty())  // aggregates without GROUP BY: one global group
      return rewrite_legacy_group_by(from, items, agg_items, {}, span_from(b));
    return mk_table({TableSelect{std::move(items), from}, span_from(b)});
  }

  TablePtr rewrite_legacy_group_by(TablePtr from, const std::vector<SelectItem>& items,
                                   const std::vector<AggItem>& aggs,
                                   const std::vector<ScalarPtr>& group_keys, Span sp) {
    if (aggs.empty())
      throw ParseError("GROUP BY requires at least one aggregate in the SELECT clause", sp);
    std::vector<std::pair<ScalarPtr, std::string>> keys;
    for (const SelectItem& it : items) {
      if (it.kind == SelectItem::Kind::Star)
        throw ParseError("* cannot be combined with GROUP BY", it.span);
      bool matches = false;
      for (const ScalarPtr& k : group_keys) {
        if (to_text(k) == to_text(it.expr)) {
          matches = true;
          break;
        }
        auto* a = std::get_if<ScalarColRef>(&k->node);
        auto* b2 = std::get_if<ScalarColRef>(&it.expr->node);
        if (a && b2 && a->ref.col == b2->ref.col) {
          matches = true;
          break;
        }
      }
      if (!matches)
        throw ParseError("SELECT item is neither an aggregate nor a GROUP BY key", it.span);
      std::string as;
      if (it.alias)
        as = *it.alias;
      else if (auto* ref = std::get_if<ScalarColRef>(&it.expr->node))
        as = ref->ref.col;
      else
        throw ParseError("GROUP BY key expression needs AS <name>", it.span);
      keys.emplace_back(it.expr, as);
    }
    return mk_table({TableGroupBy{from, std::move(keys), aggs}, sp});
  }

  // -- model expressions ------------------------------------------------------

  ModelPtr parse_model() {
    std::size_t b = pos_;
    ModelPtr m = parse_model_atom();
    while (at_kw("GIVEN")) {
      ++pos_;
      CondPtr c = parse_cond(false);
      m = mk_model({ModelGiven{m, c}, span_from(b)});
    }
    return m;
  }

  ModelPtr parse_model_atom() {
    std::size_t b = pos_;
    if (eat(Tok::LParen)) {
      ModelPtr m = parse_model();
      expect(Tok::RParen, "')'");
      return m;
    }
    if (at_kw("RENAME")) {
      ++pos_;
      ModelPtr m = parse_model();
      expect_kw("AS");
      std::string id = expect_ident("an identifier after AS");
      return mk_model({ModelRename{m, id}, span_from(b)});
    }
    if (cur().kind == Tok::Ident) {
      std::string id = advance().text;
      return mk_model({ModelId{std::move(id)}, span_from(b)});
    }
    fail("expected a model expression");
  }

  // -- conditions ------------------------------------------------------------

  CondPtr parse_cond(bool comma_is_and) {
    return parse_cond_or(comma_is_and);
  }

  CondPtr parse_cond_or(bool comma_is_and) {
    std::size_t b = pos_;
    CondPtr c = parse_cond_and(comma_is_and);
    while (eat_kw("OR")) {
      CondPtr r = parse_cond_and(comma_is_and);
      c = mk_cond({CondOr{c, r}, span_from(b)});
    }
    return c;
  }

  CondPtr parse_cond_and(bool comma_is_and) {
    std::size_t b = pos_;
    CondPtr c = parse_cond_primary(comma_is_and);
    for (;;) {
      if (eat_kw("AND")) {
      } else if (comma_is_and && cur().kind == Tok::Comma) {
        ++pos_;
      } else {
        break;
      }
      CondPtr r = parse_cond_primary(comma_is_and);
      c = mk_cond({CondAnd{c, r}, span_from(b)});
    }
    return c;
  }

  CondPtr parse_cond_primary(bool comma_is_and) {
    std::size_t b = pos_;
    if (eat(Tok::LParen)) {
      CondPtr c = parse_cond(comma_is_and);
      expect(Tok::RParen, "')'");
      return c;
    }
    if (eat(Tok::StarSym)) {
      CondStar star;
      while (at_kw("EXCEPT")) {
        ++pos_;
        star.except.push_back(parse_colname());
      }
      return mk_cond({std::move(star), span_from(b)});
    }
    if (cur().kind != Tok::Ident) fail("expected a condition");
    ColName lhs = parse_colname();
    OpKind op;
    if (eat(Tok::EqSym))
      op = OpKind::Eq;
    else if (eat(Tok::Lt))
      op = OpKind::Lt;
    else if (eat(Tok::Gt))
      op = OpKind::Gt;
    else {
      // Bare column shorthand; expanded during desugaring.
      if (!lhs.id.empty())
        return mk_cond({CondBareCol{lhs.id + "." + lhs.col}, span_from(b)});
      return mk_cond({CondBareCol{lhs.col}, span_from(b)});
    }
    ScalarPtr rhs = parse_scalar_additive();
    return mk_cond({CondAtom{std::move(lhs), op, rhs}, span_from(b)});
  }

  ColName parse_colname() {
    std::string first = expect_ident("a column reference");
    if (eat(Tok::Dot)) {
      std::string col = expect_ident("a column name after '.'");
      return ColName{first, col};
    }
    return ColName{"", first};
  }

  // -- scalar expressions ------------------------------------------------------
  //
  // scalar := or_e; or_e := and_e (OR and_e)*; and_e := cmp (AND cmp)*
  // cmp := add ((< | > | =) add)?; add := mul ((+|-) mul)*; mul := unary ((*|/) unary)*

  ScalarPtr parse_scalar() { return parse_scalar_or(); }

  ScalarPtr parse_scalar_or() {
    std::size_t b = pos_;
    ScalarPtr e = parse_scalar_and();
    while (eat_kw("OR")) {
      ScalarPtr r = parse_scalar_and();
      e = sc_op(OpKind::Or, {e, r}, span_from(b));
    }
    return e;
  }

  ScalarPtr parse_scalar_and() {
    std::size_t b = pos_;
    ScalarPtr e = parse_scalar_cmp();
    while (eat_kw("AND")) {
      ScalarPtr r = parse_scalar_cmp();
      e = sc_op(OpKind::And, {e, r}, span_from(b));
    }
    return e;
  }

  ScalarPtr parse_scalar_cmp() {
    std::size_t b = pos_;
    ScalarPtr e = parse_scalar_additive();
    OpKind op;
    if (eat(Tok::Lt))
      op = OpKind::Lt;
    else if (eat(Tok::Gt))
      op = OpKind::Gt;
    else if (eat(Tok::EqSym))
      op = OpKind::Eq;
    else
      return e;
    ScalarPtr r = parse_scalar_additive();
    return sc_op(op, {e, r}, span_from(b));
  }

  ScalarPtr parse_scalar_additive() {
    std::size_t b = pos_;
    ScalarPtr e = parse_scalar_mul();
    for (;;) {
      OpKind op;
      if (eat(Tok::Plus))
        op = OpKind::Add;
      else if (eat(Tok::Minus))
        op = OpKind::Sub;
      else
        break;
      ScalarPtr r = parse_scalar_mul();
      e = sc_op(op, {e, r}, span_from(b));
    }
    return e;
  }

  ScalarPtr parse_scalar_mul() {
    std::size_t b = pos_;
    ScalarPtr e = parse_scalar_unary();
    for (;;) {
      OpKind op;
      if (eat(Tok::StarSym))
        op = OpKind::Mul;
      else if (eat(Tok::Slash))
        op = OpKind::Div;
      else
        break;
      ScalarPtr r = parse_scalar_unary();
      e = sc_op(op, {e, r}, span_from(b));
    }
    return e;
  }

  ScalarPtr parse_scalar_unary() {
    std::size_t b = pos_;
    if (eat(Tok::Minus)) {
      ScalarPtr e = parse_scalar_unary();
      if (auto* c = std::get_if<ScalarConst>(&e->node)) {
        if (c->value.is_int())
          return sc_const(Value::integer(-c->value.as_int()), span_from(b));
        if (c->value.is_real())
          return sc_const(Value::real(-c->value.as_real()), span_from(b), true);
      }
      return sc_op(OpKind::Neg, {e}, span_from(b));
    }
    return parse_scalar_primary();
  }

  // Exposed for LIMIT / DUPLICATE counts: a primary with multiplicative chain,
  // so "LIMIT 10 * n" works while "LIMIT 5 GENERATIVE JOIN" does not consume
  // trailing clauses.
  ScalarPtr parse_scalar_primary_chain() { return parse_scalar_mul(); }

  ScalarPtr parse_scalar_primary() {
    std::size_t b = pos_;
    const Token& t = cur();
    if (t.kind == Tok::Int) {
      ++pos_;
      return sc_const(Value::integer(t.integer), span_from(b));
    }
    if (t.kind == Tok::Decimal) {
      ++pos_;
      return sc_const(Value::real(t.number), span_from(b), true);
    }
    if (t.kind == Tok::String) {
      ++pos_;
      return sc_const(Value::text(t.text), span_from(b));
    }
    if (at_kw("TRUE")) {
      ++pos_;
      return sc_const(Value::boolean(true), span_from(b));
    }
    if (at_kw("FALSE")) {
      ++pos_;
      return sc_const(Value::boolean(false), span_from(b));
    }
    if (at_kw("NULL")) {
      ++pos_;
      return sc_const(Value::null(), span_from(b));
    }
    if (at_kw("PROBABILITY")) {
      ++pos_;
      bool density = eat_kw("DENSITY");
      expect_kw("OF");
      CondPtr c = parse_cond(true);
      expect_kw("UNDER");
      ModelPtr m = parse_model();
      return sc_prob(c, m, span_from(b), density);
    }
    if (at_kw("MUTUAL")) {
      ++pos_;
      expect_kw("INFO");
      expect(Tok::LParen, "'(' after MUTUAL INFO");
      std::vector<ColName> lhs = parse_colname_list();
      expect(Tok::Comma, "','");
      std::vector<ColName> rhs = parse_colname_list();
      CondPtr cond;
      if (eat(Tok::Comma)) cond = parse_cond(false);
      expect(Tok::RParen, "')'");
      expect_kw("UNDER");
      ModelPtr m = parse_model();
      return mk_scalar({ScalarMutualInfo{std::move(lhs), std::move(rhs), cond, m}, span_from(b)});
    }
    if (t.kind == Tok::Ident) {
      std::string up = detail::upper(t.text);
      if ((up == "LOG" || up == "EXP" || up == "SQRT") && peek().kind == Tok::LParen) {
        ++pos_;
        expect(Tok::LParen, "'('");
        ScalarPtr arg = parse_scalar();
        expect(Tok::RParen, "')'");
        OpKind op = up == "LOG" ? OpKind::Log : up == "EXP" ? OpKind::Exp : OpKind::Sqrt;
        return sc_op(op, {arg}, span_from(b));
      }
      if (agg_kind_of(t) && peek().kind == Tok::LParen)
        fail("aggregate '" + t.text + "' is only allowed in a SELECT with GROUP BY");
      ColName ref = parse_colname();
      return mk_scalar({ScalarColRef{std::move(ref)}, span_from(b)});
    }
    if (eat(Tok::LParen)) {
      ScalarPtr e = parse_scalar();
      expect(Tok::RParen, "')'");
      return e;
    }
    fail("expected a scalar expression");
  }

  std::vector<ColName> parse_colname_list() {
    std::vector<ColName> cols;
    if (eat(Tok::LBracket)) {
      do {
        cols.push_back(parse_colname());
      } while (eat(Tok::Comma));
      expect(Tok::RBracket, "']'");
    } else {
      cols.push_back(parse_colname());
    }
    return cols;
  }
};

inline Query parse(const std::string& text) { return Parser(text).parse_query(); }

}  // namespace gensql
