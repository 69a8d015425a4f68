// comply/spec_lang.hpp - Recursive-descent parser for constraint and scenario files
//
// Constraint files hold `constraint <id> { ... }` blocks. Scenario files hold the
// environment, facts, observability mask, scripted events, context rules,
// vocabulary, value knowledge, instructor script and run parameters, and pull in
// constraint files by path. Every failure is reported as a positioned Diagnostic;
// no input text makes the parser throw out of its public entry points.
#pragma once

#include <cctype>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "comply/ast.hpp"
#include "comply/diagnostic.hpp"

namespace comply
{

namespace detail
{

enum class Tok {
  ident, number, string, lbrace, rbrace, lparen, rparen, comma, colon, dot,
  eq, ne, lt, le, gt, ge, plus, minus, star, arrow, end
};

inline const char * describe(Tok t)
{
  switch (t) {
    case Tok::ident: return "identifier";
    case Tok::number: return "number";
    case Tok::string: return "string";
    case Tok::lbrace: return "'{'";
    case Tok::rbrace: return "'}'";
    case Tok::lparen: return "'('";
    case Tok::rparen: return "')'";
    case Tok::comma: return "','";
    case Tok::colon: return "':'";
    case Tok::dot: return "'.'";
    case Tok::eq: return "'='";
    case Tok::ne: return "'!='";
    case Tok::lt: return "'<'";
    case Tok::le: return "'<='";
    case Tok::gt: return "'>'";
    case Tok::ge: return "'>='";
    case Tok::plus: return "'+'";
    case Tok::minus: return "'-'";
    case Tok::star: return "'*'";
    case Tok::arrow: return "'->'";
    case Tok::end: return "end of input";
  }
  return "?";
}

struct LexState
{
  std::size_t offset = 0;
  int line = 1;
  int column = 1;
};

struct Token
{
  Tok kind = Tok::end;
  std::string text;
  SourcePos pos;
  LexState start;
};

class Lexer
{
public:
  Lexer(std::string_view src, std::string file, std::vector<Diagnostic> & diags)
  : src_(src), file_(std::move(file)), diags_(diags)
  {
  }

  Token next()
  {
    skip_blank();
    Token tok;
    tok.start = st_;
    tok.pos = {st_.line, st_.column};
    if (st_.offset >= src_.size()) {
      tok.kind = Tok::end;
      return tok;
    }
    const char c = src_[st_.offset];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t b = st_.offset;
      while (st_.offset < src_.size() && is_ident_char(src_[st_.offset])) advance();
      tok.kind = Tok::ident;
      tok.text = std::string(src_.substr(b, st_.offset - b));
      return tok;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t b = st_.offset;
      while (st_.offset < src_.size() && std::isdigit(static_cast<unsigned char>(src_[st_.offset]))) {
        advance();
      }
      if (st_.offset + 1 < src_.size() && src_[st_.offset] == '.' &&
          std::isdigit(static_cast<unsigned char>(src_[st_.offset + 1])))
      {
        advance();
        while (st_.offset < src_.size() &&
               std::isdigit(static_cast<unsigned char>(src_[st_.offset])))
        {
          advance();
        }
      }
      tok.kind = Tok::number;
      tok.text = std::string(src_.substr(b, st_.offset - b));
      return tok;
    }
    if (c == '"') {
      advance();
      std::size_t b = st_.offset;
      while (st_.offset < src_.size() && src_[st_.offset] != '"' && src_[st_.offset] != '\n') {
        advance();
      }
      if (st_.offset >= src_.size() || src_[st_.offset] != '"') {
        report(tok.pos, "unterminated string literal");
        tok.kind = Tok::string;
        tok.text = std::string(src_.substr(b, st_.offset - b));
        return tok;
      }
      tok.text = std::string(src_.substr(b, st_.offset - b));
      advance();
      tok.kind = Tok::string;
      return tok;
    }
    advance();
    auto two = [&](char second, Tok yes, Tok no) {
      if (st_.offset < src_.size() && src_[st_.offset] == second) {
        advance();
        return yes;
      }
      return no;
    };
    switch (c) {
      case '{': tok.kind = Tok::lbrace; break;
      case '}': tok.kind = Tok::rbrace; break;
      case '(': tok.kind = Tok::lparen; break;
      case ')': tok.kind = Tok::rparen; break;
      case ',': tok.kind = Tok::comma; break;
      case ':': tok.kind = Tok::colon; break;
      case '.': tok.kind = Tok::dot; break;
      case '=': tok.kind = Tok::eq; break;
      case '+': tok.kind = Tok::plus; break;
      case '*': tok.kind = Tok::star; break;
      case '<': tok.kind = two('=', Tok::le, Tok::lt); break;
      case '>': tok.kind = two('=', Tok::ge, Tok::gt); break;
      case '-': tok.kind = two('>', Tok::arrow, Tok::minus); break;
      case '!':
        if (st_.offset < src_.size() && src_[st_.offset] == '=') {
          advance();
          tok.kind = Tok::ne;
          break;
        }
        [[fallthrough]];
      default: {
        std::string shown;
        if (std::isprint(static_cast<unsigned char>(c))) {
          shown = std::string("'") + c + "'";
        } else {
          static const char * hex = "0123456789abcdef";
          const auto u = static_cast<unsigned char>(c);
          shown = std::string("byte 0x") + hex[u >> 4] + hex[u & 15];
        }
        report(tok.pos, "unexpected character " + shown);
        return next();
      }
    }
    tok.text = std::string(src_.substr(tok.start.offset, st_.offset - tok.start.offset));
    return tok;
  }

  /// Reads the next whitespace-delimited word verbatim (used for paths and puzzle rows).
  /// If `accept` rejects it, the lexer position is left unchanged.
  template <class Accept>
  std::optional<std::pair<std::string, SourcePos>> raw_word(Accept && accept)
  {
    skip_blank();
    const LexState saved = st_;
    if (st_.offset >= src_.size()) return std::nullopt;
    SourcePos pos{st_.line, st_.column};
    std::size_t b = st_.offset;
    while (st_.offset < src_.size() && !std::isspace(static_cast<unsigned char>(src_[st_.offset])) &&
           src_[st_.offset] != '}' && src_[st_.offset] != '#')
    {
      advance();
    }
    std::string word(src_.substr(b, st_.offset - b));
    if (word.empty() || !accept(word)) {
      st_ = saved;
      return std::nullopt;
    }
    return std::make_pair(std::move(word), pos);
  }

  void rewind(const LexState & s) { st_ = s; }

  /// Next non-blank character without consuming anything, or '\0' at end.
  char peek_char()
  {
    const LexState saved = st_;
    skip_blank();
    const char c = st_.offset < src_.size() ? src_[st_.offset] : '\0';
    st_ = saved;
    return c;
  }

private:
  static bool is_ident_char(char c)
  {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  }

  void advance()
  {
    if (src_[st_.offset] == '\n') {
      ++st_.line;
      st_.column = 1;
    } else {
      ++st_.column;
    }
    ++st_.offset;
  }

  void skip_blank()
  {
    while (st_.offset < src_.size()) {
      const char c = src_[st_.offset];
      if (c == '#') {
        while (st_.offset < src_.size() && src_[st_.offset] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  void report(SourcePos pos, std::string msg)
  {
    // Rewinding re-lexes text; report each offending offset once.
    if (reported_any_ && st_.offset <= reported_until_) return;
    reported_any_ = true;
    reported_until_ = st_.offset;
    diags_.push_back({Severity::error, file_, pos, std::move(msg)});
  }

  bool reported_any_ = false;
  std::size_t reported_until_ = 0;

  std::string_view src_;
  std::string file_;
  std::vector<Diagnostic> & diags_;
  LexState st_;
};

struct SyntaxError
{
};

inline constexpr int kMaxNesting = 200;

class Parser
{
public:
  Parser(std::string_view src, std::string file)
  : file_(std::move(file)), lexer_(src, file_, diags_)
  {
  }

  std::vector<Diagnostic> & diagnostics() { return diags_; }

  std::vector<ConstraintSpec> parse_constraint_file()
  {
    std::vector<ConstraintSpec> out;
    while (peek().kind != Tok::end) {
      const Token start = peek();
      try {
        if (!at_word("constraint")) {
          fail(start, "unknown keyword '" + start.text + "' (expected 'constraint')");
        }
        out.push_back(constraint_block());
      } catch (const SyntaxError &) {
        recover(start, {"constraint"});
      }
    }
    check_duplicate_ids(out);
    return out;
  }

  ScenarioSpec parse_scenario_file()
  {
    ScenarioSpec sc;
    sc.file = file_;
    bool have_env = false;
    bool have_run = false;
    SourcePos end_pos;
    while (peek().kind != Tok::end) {
      const Token start = peek();
      try {
        if (start.kind != Tok::ident) fail(start, "expected a scenario block keyword");
        const std::string & kw = start.text;
        if (kw == "environment") {
          if (have_env) fail(start, "duplicate environment block");
          environment_block(sc);
          have_env = true;
        } else if (kw == "facts") {
          facts_block(sc);
        } else if (kw == "hidden") {
          hidden_block(sc);
        } else if (kw == "events") {
          events_block(sc);
        } else if (kw == "contexts") {
          contexts_block(sc);
        } else if (kw == "constraints") {
          constraints_ref(sc);
        } else if (kw == "vocab") {
          vocab_block(sc);
        } else if (kw == "values") {
          values_block(sc);
        } else if (kw == "instructor") {
          instructor_block(sc);
        } else if (kw == "run") {
          if (have_run) fail(start, "duplicate run block");
          run_block(sc);
          have_run = true;
        } else {
          fail(start, "unknown keyword '" + kw + "'");
        }
      } catch (const SyntaxError &) {
        recover(start, kScenarioKeywords);
      }
    }
    end_pos = peek().pos;
    if (!have_env) error(end_pos, "missing environment block");
    if (!have_run) {
      error(end_pos, "missing run parameters (run block with maxTicks and seed)");
    }
    return sc;
  }

  /// Parses a standalone condition (used by tests and tooling).
  std::optional<Condition> parse_condition_only()
  {
    try {
      Condition c = condition(0);
      if (peek().kind != Tok::end) fail(peek(), "unexpected " + token_desc(peek()));
      return c;
    } catch (const SyntaxError &) {
      return std::nullopt;
    }
  }

private:
  inline static const std::set<std::string> kScenarioKeywords = {
    "environment", "facts", "hidden", "events", "contexts", "constraints",
    "vocab", "values", "instructor", "run"};

  // -- token stream ---------------------------------------------------------

  const Token & peek(std::size_t k = 0)
  {
    while (buffer_.size() <= k) buffer_.push_back(lexer_.next());
    return buffer_[k];
  }

  Token take()
  {
    Token t = peek();
    buffer_.pop_front();
    return t;
  }

  bool at_word(std::string_view w) { return peek().kind == Tok::ident && peek().text == w; }

  bool accept(Tok k)
  {
    if (peek().kind == k) {
      take();
      return true;
    }
    return false;
  }

  static std::string token_desc(const Token & t)
  {
    if (t.kind == Tok::ident) return "'" + t.text + "'";
    if (t.kind == Tok::number) return "number " + t.text;
    return describe(t.kind);
  }

  Token expect(Tok k, const std::string & context)
  {
    if (peek().kind != k) {
      fail(peek(), std::string("expected ") + describe(k) + " " + context + ", found " +
                     token_desc(peek()));
    }
    return take();
  }

  std::string expect_ident(const std::string & what)
  {
    if (peek().kind != Tok::ident) {
      fail(peek(), "expected " + what + ", found " + token_desc(peek()));
    }
    return take().text;
  }

  void expect_word(std::string_view w)
  {
    if (!at_word(w)) {
      fail(peek(), "expected '" + std::string(w) + "', found " + token_desc(peek()));
    }
    take();
  }

  [[noreturn]] void fail(const Token & at, std::string msg)
  {
    error(at.pos, std::move(msg));
    throw SyntaxError{};
  }

  void error(SourcePos pos, std::string msg)
  {
    diags_.push_back({Severity::error, file_, pos, std::move(msg)});
  }

  void warning(SourcePos pos, std::string msg)
  {
    diags_.push_back({Severity::warning, file_, pos, std::move(msg)});
  }

  /// Skips the rest of the failed block: to just past the brace matching the first
  /// `{` after `start`, or to the next top-level keyword if no brace is open.
  void recover(const Token & start, const std::set<std::string> & keywords)
  {
    buffer_.clear();
    lexer_.rewind(start.start);
    take();  // the block keyword itself (guarantees progress)
    int depth = 0;
    while (true) {
      const Token & t = peek();
      if (t.kind == Tok::end) return;
      if (depth == 0 && t.kind == Tok::ident && keywords.count(t.text)) return;
      if (t.kind == Tok::lbrace) ++depth;
      if (t.kind == Tok::rbrace) {
        take();
        if (--depth <= 0) return;
        continue;
      }
      take();
    }
  }

  void sync_lexer()
  {
    if (!buffer_.empty()) {
      lexer_.rewind(buffer_.front().start);
      buffer_.clear();
    }
  }

  // -- expressions ----------------------------------------------------------

  static bool is_cmp(Tok k)
  {
    return k == Tok::eq || k == Tok::ne || k == Tok::lt || k == Tok::le || k == Tok::gt ||
           k == Tok::ge;
  }

  static CmpOp cmp_of(Tok k)
  {
    switch (k) {
      case Tok::lt: return CmpOp::lt;
      case Tok::le: return CmpOp::le;
      case Tok::ne: return CmpOp::ne;
      case Tok::ge: return CmpOp::ge;
      case Tok::gt: return CmpOp::gt;
      default: return CmpOp::eq;
    }
  }

  void guard_depth(int depth)
  {
    if (depth > kMaxNesting) fail(peek(), "expression nested too deeply");
  }

  Condition condition(int depth)
  {
    guard_depth(depth);
    const Token & t = peek();
    if (t.kind == Tok::ident && peek(1).kind == Tok::lparen &&
        (t.text == "and" || t.text == "or" || t.text == "not"))
    {
      const Token head = take();
      take();  // (
      std::vector<Condition> kids;
      kids.push_back(condition(depth + 1));
      while (accept(Tok::comma)) kids.push_back(condition(depth + 1));
      expect(Tok::rparen, "to close " + head.text + "(...)");
      if (head.text == "not") {
        if (kids.size() != 1) fail(head, "not(...) takes exactly one condition");
        return Condition::negate(std::move(kids[0]), head.pos);
      }
      return head.text == "and" ? Condition::all(std::move(kids), head.pos)
                                : Condition::any(std::move(kids), head.pos);
    }
    const SourcePos pos = t.pos;
    Term lhs = sum(depth + 1);
    if (is_cmp(peek().kind)) {
      const CmpOp op = cmp_of(take().kind);
      Term rhs = sum(depth + 1);
      return Condition::compare(std::move(lhs), op, std::move(rhs), pos);
    }
    if (lhs.kind == Term::Kind::literal && kind_of(lhs.literal) == ValueKind::boolean) {
      return Condition::constant(std::get<bool>(lhs.literal), pos);
    }
    fail(peek(), "expected comparison operator, found " + token_desc(peek()));
  }

  Term sum(int depth)
  {
    guard_depth(depth);
    Term lhs = product(depth + 1);
    while (peek().kind == Tok::plus || peek().kind == Tok::minus) {
      const Token op = take();
      Term rhs = product(depth + 1);
      lhs = Term::arith(
        op.kind == Tok::plus ? ArithOp::add : ArithOp::sub, std::move(lhs), std::move(rhs), op.pos);
    }
    return lhs;
  }

  Term product(int depth)
  {
    guard_depth(depth);
    Term lhs = atom(depth + 1);
    while (peek().kind == Tok::star) {
      const Token op = take();
      Term rhs = atom(depth + 1);
      lhs = Term::arith(ArithOp::mul, std::move(lhs), std::move(rhs), op.pos);
    }
    return lhs;
  }

  Number number_value(const Token & t)
  {
    auto n = parse_decimal(t.text);
    if (!n) fail(t, "number out of range: " + t.text);
    return *n;
  }

  Term atom(int depth)
  {
    guard_depth(depth);
    const Token t = peek();
    switch (t.kind) {
      case Tok::number: take(); return Term::constant(number_value(t), t.pos);
      case Tok::minus: {
        take();
        if (peek().kind != Tok::number) {
          fail(peek(), "expected number after '-', found " + token_desc(peek()));
        }
        const Token n = take();
        return Term::constant(-number_value(n), t.pos);
      }
      case Tok::lparen: {
        take();
        Term inner = sum(depth + 1);
        expect(Tok::rparen, "to close parenthesized term");
        return inner;
      }
      case Tok::ident: {
        take();
        if (accept(Tok::dot)) {
          std::string attr = expect_ident("attribute name after '.'");
          return Term::attribute(t.text, std::move(attr), t.pos);
        }
        if (t.text == "true" || t.text == "false") return Term::constant(t.text == "true", t.pos);
        if ((t.text == "and" || t.text == "or" || t.text == "not")) {
          fail(t, "'" + t.text + "' is a connective and cannot be used as a term");
        }
        return Term::constant(Symbol{t.text}, t.pos);
      }
      default: fail(t, "expected term, found " + token_desc(t));
    }
  }

  Value literal_value()
  {
    const Token t = peek();
    if (t.kind == Tok::number) {
      take();
      return number_value(t);
    }
    if (t.kind == Tok::minus) {
      take();
      const Token n = expect(Tok::number, "after '-'");
      return Number(-number_value(n));
    }
    if (t.kind == Tok::ident) {
      take();
      if (t.text == "true") return true;
      if (t.text == "false") return false;
      return Symbol{t.text};
    }
    fail(t, "expected a value, found " + token_desc(t));
  }

  std::int64_t integer_value(const std::string & what)
  {
    const Token t = peek();
    const Value v = literal_value();
    if (kind_of(v) != ValueKind::number || std::get<Number>(v).denominator() != 1) {
      fail(t, what + " must be an integer");
    }
    return std::get<Number>(v).numerator();
  }

  // -- constraint blocks ----------------------------------------------------

  ConstraintSpec constraint_block()
  {
    const Token kw = take();
    ConstraintSpec c;
    c.pos = kw.pos;
    c.file = file_;
    c.id = expect_ident("constraint id");
    expect(Tok::lbrace, "after constraint id");
    std::set<std::string> seen;
    bool have_modality = false;
    bool have_holds = false;
    while (peek().kind != Tok::rbrace) {
      if (peek().kind == Tok::end) fail(peek(), "unbalanced block: missing '}' for constraint " + c.id);
      const Token field = peek();
      const std::string name = expect_ident("field name");
      expect(Tok::colon, "after field '" + name + "'");
      if (!seen.insert(name).second) fail(field, "duplicate field '" + name + "'");
      if (name == "modality") {
        const Token m = peek();
        const std::string kw2 = expect_ident("modality keyword");
        if (kw2 == "require") c.modality = Modality::require;
        else if (kw2 == "forbid") c.modality = Modality::forbid;
        else if (kw2 == "prefer") c.modality = Modality::prefer;
        else if (kw2 == "avoid") c.modality = Modality::avoid;
        else fail(m, "unknown modality '" + kw2 + "' (expected require, forbid, prefer or avoid)");
        have_modality = true;
      } else if (name == "context") {
        c.context_tags.insert(expect_ident("context tag"));
        while (accept(Tok::comma)) c.context_tags.insert(expect_ident("context tag"));
      } else if (name == "priority") {
        c.priority = integer_value("priority");
      } else if (name == "scope") {
        do {
          ScopeEntry e;
          e.pos = peek().pos;
          e.var = expect_ident("scope variable");
          expect(Tok::colon, "between scope variable and type");
          e.type = expect_ident("entity type");
          c.scope.push_back(std::move(e));
        } while (accept(Tok::comma));
      } else if (name == "when") {
        c.when = condition(0);
      } else if (name == "holds") {
        c.holds = condition(0);
        have_holds = true;
      } else {
        fail(field, "unknown keyword '" + name + "' in constraint " + c.id);
      }
    }
    const Token close = take();
    if (!have_modality) fail(close, "constraint " + c.id + " is missing 'modality:'");
    if (!have_holds) fail(close, "constraint " + c.id + " is missing 'holds:'");
    check_scope(c);
    return c;
  }

  void check_scope(const ConstraintSpec & c)
  {
    std::set<std::string> vars;
    bool bad = false;
    for (const auto & e : c.scope) {
      if (!vars.insert(e.var).second) {
        error(e.pos, "duplicate scope variable " + e.var);
        bad = true;
      }
    }
    std::set<std::string> reported;
    auto check = [&](const Term & t) {
      if (!vars.count(t.var) && reported.insert(t.var).second) {
        error(t.pos, "unbound variable " + t.var);
        bad = true;
      }
    };
    if (c.when) for_each_attribute(*c.when, check);
    for_each_attribute(c.holds, check);
    if (bad) throw SyntaxError{};
  }

  void check_duplicate_ids(const std::vector<ConstraintSpec> & cs)
  {
    std::set<std::string> ids;
    for (const auto & c : cs) {
      if (!ids.insert(c.id).second) error(c.pos, "duplicate constraint id " + c.id);
    }
  }

  // -- scenario blocks ------------------------------------------------------

  void environment_block(ScenarioSpec & sc)
  {
    const Token kw = take();
    sc.environment.pos = kw.pos;
    const Token k = peek();
    const std::string kind = expect_ident("environment kind");
    if (kind == "sudoku") sc.environment.kind = EnvironmentKind::sudoku;
    else if (kind == "driving") sc.environment.kind = EnvironmentKind::driving;
    else fail(k, "unknown environment kind '" + kind + "' (expected sudoku or driving)");
    if (!accept(Tok::lbrace)) return;
    while (!accept(Tok::rbrace)) {
      if (peek().kind == Tok::end) fail(peek(), "unbalanced block: missing '}' for environment");
      const Token key = peek();
      const std::string name = expect_ident("environment parameter");
      if (sc.environment.params.count(name) || (name == "puzzle" && !sc.environment.puzzle.empty())) {
        fail(key, "duplicate environment parameter " + name);
      }
      expect(Tok::eq, "after '" + name + "'");
      if (name == "puzzle") {
        // Rows are raw words of digits and dots; read verbatim so leading zeros survive.
        auto is_row = [](const std::string & w) {
          return w.find_first_not_of("0123456789.") == std::string::npos;
        };
        sync_lexer();
        while (auto w = lexer_.raw_word(is_row)) sc.environment.puzzle += w->first;
        if (sc.environment.puzzle.empty()) fail(peek(), "expected puzzle digits after 'puzzle ='");
      } else {
        sc.environment.params[name] = literal_value();
      }
      accept(Tok::comma);
    }
  }

  void facts_block(ScenarioSpec & sc)
  {
    take();
    expect(Tok::lbrace, "after 'facts'");
    while (!accept(Tok::rbrace)) {
      if (peek().kind == Tok::end) fail(peek(), "unbalanced block: missing '}' for facts");
      FactDecl f;
      f.pos = peek().pos;
      f.entity = expect_ident("entity id");
      expect(Tok::colon, "between entity and type");
      f.type = expect_ident("entity type");
      expect(Tok::lbrace, "to open attribute list");
      std::set<std::string> attrs;
      if (!accept(Tok::rbrace)) {
        do {
          const Token a = peek();
          std::string attr = expect_ident("attribute name");
          if (attr == "id") fail(a, "'id' is reserved for the entity identifier");
          if (!attrs.insert(attr).second) fail(a, "duplicate attribute " + attr + " on " + f.entity);
          expect(Tok::eq, "after attribute name");
          f.attrs.emplace_back(std::move(attr), literal_value());
        } while (accept(Tok::comma));
        expect(Tok::rbrace, "to close attribute list");
      }
      for (const auto & other : sc.facts) {
        if (other.entity == f.entity) {
          error(f.pos, "duplicate entity " + f.entity);
          throw SyntaxError{};
        }
      }
      sc.facts.push_back(std::move(f));
    }
  }

  void hidden_block(ScenarioSpec & sc)
  {
    take();
    expect(Tok::lbrace, "after 'hidden'");
    while (!accept(Tok::rbrace)) {
      if (peek().kind == Tok::end) fail(peek(), "unbalanced block: missing '}' for hidden");
      HiddenDecl h;
      h.pos = peek().pos;
      if (accept(Tok::star)) h.entity = "*";
      else h.entity = expect_ident("entity id or '*'");
      expect(Tok::dot, "between entity and attribute");
      h.attr = expect_ident("attribute name");
      sc.hidden.push_back(std::move(h));
      accept(Tok::comma);
    }
  }

  void events_block(ScenarioSpec & sc)
  {
    take();
    expect(Tok::lbrace, "after 'events'");
    std::set<std::tuple<std::int64_t, std::string, std::string>> targets;
    for (const auto & e : sc.events) {
      for (const auto & a : e.assigns) targets.emplace(e.tick, e.entity, a.attr);
    }
    while (!accept(Tok::rbrace)) {
      if (peek().kind == Tok::end) fail(peek(), "unbalanced block: missing '}' for events");
      EventDecl ev;
      ev.pos = peek().pos;
      expect_word("at");
      const Token tick_tok = peek();
      ev.tick = integer_value("event tick");
      if (ev.tick < 0) fail(tick_tok, "event tick must be non-negative");
      expect(Tok::colon, "after event tick");
      const Token verb = peek();
      const std::string v = expect_ident("'set' or 'spawn'");
      if (v == "set") {
        ev.kind = EventDecl::Kind::set;
        ev.entity = expect_ident("entity id");
        expect(Tok::dot, "between entity and attribute");
        Assignment a;
        a.attr = expect_ident("attribute name");
        expect(Tok::eq, "in set event");
        a.value = sum(0);
        ev.assigns.push_back(std::move(a));
      } else if (v == "spawn") {
        ev.kind = EventDecl::Kind::spawn;
        ev.entity = expect_ident("entity id");
        expect(Tok::colon, "between entity and type");
        ev.type = expect_ident("entity type");
        expect(Tok::lbrace, "to open spawn attributes");
        if (!accept(Tok::rbrace)) {
          do {
            Assignment a;
            a.attr = expect_ident("attribute name");
            expect(Tok::eq, "after attribute name");
            a.value = sum(0);
            ev.assigns.push_back(std::move(a));
          } while (accept(Tok::comma));
          expect(Tok::rbrace, "to close spawn attributes");
        }
      } else {
        fail(verb, "unknown event '" + v + "' (expected set or spawn)");
      }
      for (const auto & a : ev.assigns) {
        if (!targets.emplace(ev.tick, ev.entity, a.attr).second) {
          error(ev.pos, "duplicate event at tick " + std::to_string(ev.tick) + " targeting " +
                          ev.entity + "." + a.attr);
        }
      }
      sc.events.push_back(std::move(ev));
    }
  }

  void contexts_block(ScenarioSpec & sc)
  {
    take();
    expect(Tok::lbrace, "after 'contexts'");
    while (!accept(Tok::rbrace)) {
      if (peek().kind == Tok::end) fail(peek(), "unbalanced block: missing '}' for contexts");
      ContextRule r;
      r.pos = peek().pos;
      expect_word("rule");
      r.tag = expect_ident("context tag");
      expect_word("when");
      r.condition = condition(0);
      bool only_self = true;
      SourcePos bad;
      for_each_attribute(r.condition, [&](const Term & t) {
        if (t.var != "self" && only_self) {
          only_self = false;
          bad = t.pos;
        }
      });
      if (!only_self) error(bad, "context rule " + r.tag + " may only reference self");
      sc.contexts.push_back(std::move(r));
    }
  }

  void constraints_ref(ScenarioSpec & sc)
  {
    const Token kw = take();
    expect_word("file");
    sync_lexer();
    if (lexer_.peek_char() == '"') {
      sc.constraint_files.push_back({take().text, kw.pos});
      return;
    }
    auto w = lexer_.raw_word([](const std::string &) { return true; });
    if (!w) fail(peek(), "expected a constraint file path");
    sc.constraint_files.push_back({w->first, kw.pos});
  }

  void vocab_block(ScenarioSpec & sc)
  {
    take();
    expect(Tok::lbrace, "after 'vocab'");
    while (!accept(Tok::rbrace)) {
      if (peek().kind == Tok::end) fail(peek(), "unbalanced block: missing '}' for vocab");
      const Token start = peek();
      expect_word("term");
      auto [name, mapping] = term_mapping();
      if (sc.vocab.count(name)) fail(start, "duplicate vocabulary term " + name);
      sc.vocab.emplace(std::move(name), std::move(mapping));
    }
  }

  std::pair<std::string, TermMapping> term_mapping()
  {
    std::string name = expect_ident("external term");
    expect(Tok::arrow, "after external term");
    const Token k = peek();
    const std::string kind = expect_ident("'attribute', 'type' or 'context'");
    TermMapping m;
    if (kind == "attribute") m.kind = TermKind::attribute;
    else if (kind == "type") m.kind = TermKind::type;
    else if (kind == "context") m.kind = TermKind::context;
    else fail(k, "unknown term kind '" + kind + "' (expected attribute, type or context)");
    m.internal = expect_ident("internal name");
    return {std::move(name), std::move(m)};
  }

  void values_block(ScenarioSpec & sc)
  {
    take();
    expect(Tok::lbrace, "after 'values'");
    while (!accept(Tok::rbrace)) {
      if (peek().kind == Tok::end) fail(peek(), "unbalanced block: missing '}' for values");
      const Token id_tok = peek();
      std::string id = expect_ident("constraint id");
      expect(Tok::colon, "after constraint id");
      const std::int64_t p = integer_value("priority");
      if (!sc.values.emplace(id, p).second) fail(id_tok, "duplicate value entry for " + id);
      accept(Tok::comma);
    }
  }

  void instructor_block(ScenarioSpec & sc)
  {
    take();
    sc.has_instructor = true;
    expect(Tok::lbrace, "after 'instructor'");
    while (!accept(Tok::rbrace)) {
      if (peek().kind == Tok::end) fail(peek(), "unbalanced block: missing '}' for instructor");
      InstructorAnswer a;
      a.pos = peek().pos;
      const Token verb = peek();
      const std::string v = expect_ident("instructor answer");
      if (v == "teach") {
        a.kind = InstructorAnswer::Kind::teach;
        expect_word("term");
        auto [name, mapping] = term_mapping();
        a.term = std::move(name);
        a.mapping = std::move(mapping);
      } else if (v == "priority") {
        a.kind = InstructorAnswer::Kind::priority;
        a.first = expect_ident("constraint id");
        expect_word("vs");
        a.second = expect_ident("constraint id");
        expect(Tok::eq, "before the preferred constraint");
        const Token w = peek();
        a.winner = expect_ident("preferred constraint id");
        if (a.winner != a.first && a.winner != a.second) {
          fail(w, "priority answer must name " + a.first + " or " + a.second);
        }
      } else if (v == "relevance") {
        a.kind = InstructorAnswer::Kind::relevance;
        a.constraint_id = expect_ident("constraint id");
        expect_word("in");
        a.tag = expect_ident("context tag");
        expect(Tok::eq, "before yes/no");
        const Token yn = peek();
        const std::string ans = expect_ident("yes or no");
        if (ans != "yes" && ans != "no") fail(yn, "relevance answer must be yes or no");
        a.relevant = ans == "yes";
      } else {
        fail(verb, "unknown instructor answer '" + v + "' (expected teach, priority or relevance)");
      }
      sc.instructor.push_back(std::move(a));
    }
  }

  void run_block(ScenarioSpec & sc)
  {
    const Token kw = take();
    expect(Tok::lbrace, "after 'run'");
    std::set<std::string> seen;
    std::map<std::string, SourcePos> where;
    while (!accept(Tok::rbrace)) {
      if (peek().kind == Tok::end) fail(peek(), "unbalanced block: missing '}' for run");
      const Token key = peek();
      const std::string name = expect_ident("run parameter");
      if (!seen.insert(name).second) fail(key, "duplicate run parameter " + name);
      expect(Tok::eq, "after '" + name + "'");
      where[name] = peek().pos;
      const std::int64_t v = integer_value(name);
      if (name == "maxTicks") sc.run.max_ticks = v;
      else if (name == "seed") sc.run.seed = v;
      else if (name == "staleness") sc.run.staleness = v;
      else if (name == "searchDepth") sc.run.search_depth = v;
      else if (name == "groundingLimit") sc.run.grounding_limit = v;
      else fail(key, "unknown run parameter '" + name + "'");
      accept(Tok::comma);
    }
    if (!seen.count("maxTicks")) error(kw.pos, "missing run parameter maxTicks");
    else if (sc.run.max_ticks < 1) error(where["maxTicks"], "maxTicks must be ≥ 1");
    if (!seen.count("seed")) error(kw.pos, "missing run parameter seed");
    if (seen.count("staleness") && sc.run.staleness < 0) {
      error(where["staleness"], "staleness must be ≥ 0");
    }
    if (seen.count("searchDepth") && sc.run.search_depth < 1) {
      error(where["searchDepth"], "searchDepth must be ≥ 1");
    }
    if (seen.count("groundingLimit") && sc.run.grounding_limit < 1) {
      error(where["groundingLimit"], "groundingLimit must be ≥ 1");
    }
  }

  std::string file_;
  std::vector<Diagnostic> diags_;
  Lexer lexer_;
  std::deque<Token> buffer_;
};

}  // namespace detail

/// Parses a constraint file. On any error the result carries no constraints.
inline ParseResult<std::vector<ConstraintSpec>> parse_constraint_file(
  std::string_view source, const std::string & file = "")
{
  detail::Parser p(source, file);
  auto specs = p.parse_constraint_file();
  ParseResult<std::vector<ConstraintSpec>> r;
  r.diagnostics = std::move(p.diagnostics());
  if (!has_errors(r.diagnostics)) r.value = std::move(specs);
  return r;
}

/// Parses one condition expression, e.g. `and(a.x > 1, not(a.y = b.y))`.
inline ParseResult<Condition> parse_condition(std::string_view source)
{
  detail::Parser p(source, "");
  auto c = p.parse_condition_only();
  ParseResult<Condition> r;
  r.diagnostics = std::move(p.diagnostics());
  if (c && !has_errors(r.diagnostics)) r.value = std::move(*c);
  return r;
}

/// Returns the text of a referenced file, or nullopt if it cannot be read.
using SourceLoader = std::function<std::optional<std::string>(const std::string & path)>;

/// Parses a scenario and every constraint file it references. Diagnostics from all
/// files are aggregated; any error means no scenario is returned.
inline ParseResult<ScenarioSpec> parse_scenario_file(
  std::string_view source, const SourceLoader & loader, const std::string & file = "")
{
  detail::Parser p(source, file);
  ScenarioSpec sc = p.parse_scenario_file();
  std::vector<Diagnostic> diags = std::move(p.diagnostics());

  std::map<std::string, std::string> id_origin;
  for (const auto & [path, ref_pos] : sc.constraint_files) {
    std::optional<std::string> text;
    if (loader) text = loader(path);
    if (!text) {
      diags.push_back({Severity::error, file, ref_pos, "cannot read constraint file '" + path + "'"});
      continue;
    }
    auto parsed = parse_constraint_file(*text, path);
    diags.insert(diags.end(), parsed.diagnostics.begin(), parsed.diagnostics.end());
    if (!parsed.value) continue;
    for (auto & c : *parsed.value) {
      auto [it, fresh] = id_origin.emplace(c.id, path);
      if (!fresh) {
        diags.push_back({Severity::error, path, c.pos,
                         "duplicate constraint id " + c.id + " (also defined in " + it->second + ")"});
        continue;
      }
      sc.constraints.push_back(std::move(c));
    }
  }
  for (const auto & [id, p2] : sc.values) {
    if (!id_origin.count(id)) {
      diags.push_back({Severity::warning, file, {1, 1}, "values entry for unknown constraint " + id});
    }
  }

  ParseResult<ScenarioSpec> r;
  r.diagnostics = std::move(diags);
  if (!has_errors(r.diagnostics)) r.value = std::move(sc);
  return r;
}

inline std::optional<std::string> read_text_file(const std::filesystem::path & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Loads a scenario from disk; constraint file paths resolve relative to its directory.
inline ParseResult<ScenarioSpec> load_scenario(const std::filesystem::path & path)
{
  auto text = read_text_file(path);
  if (!text) {
    ParseResult<ScenarioSpec> r;
    r.diagnostics.push_back({Severity::error, path.string(), {1, 1}, "cannot read scenario file"});
    return r;
  }
  const auto dir = path.parent_path();
  auto loader = [dir](const std::string & rel) -> std::optional<std::string> {
    std::filesystem::path p(rel);
    if (p.is_relative()) p = dir / p;
    return read_text_file(p);
  };
  auto r = parse_scenario_file(*text, loader, path.string());
  if (r.value) r.value->name = path.stem().string();
  return r;
}

}  // namespace comply
