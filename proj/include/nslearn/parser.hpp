#pragma once

#include <cctype>
#include <cstdint>
#include <set>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nslearn/schema.hpp"

namespace nsl {

// Errors carry source position where one is known.
class TheoryError : public std::runtime_error {
public:
  TheoryError(const std::string& msg, int line = 0, int col = 0)
      : std::runtime_error(format(msg, line, col)), line_(line), col_(col) {}
  int line() const { return line_; }
  int col() const { return col_; }

private:
  static std::string format(const std::string& msg, int line, int col) {
    if (line <= 0) return msg;
    return msg + " (line " + std::to_string(line) + ", col " +
           std::to_string(col) + ")";
  }
  int line_;
  int col_;
};

class ParseError : public TheoryError {
public:
  using TheoryError::TheoryError;
};
class StratificationError : public TheoryError {
public:
  using TheoryError::TheoryError;
};

// ---------------------------------------------------------------------------
// AST
// ---------------------------------------------------------------------------

struct Term {
  enum class Kind { constant, variable };
  Kind kind = Kind::constant;
  std::string text;
  bool is_int = false;
  long long num = 0;

  static Term var(std::string name) {
    Term t;
    t.kind = Kind::variable;
    t.text = std::move(name);
    return t;
  }
  static Term name(std::string s) {
    Term t;
    t.text = std::move(s);
    return t;
  }
  static Term integer(long long v) {
    Term t;
    t.text = std::to_string(v);
    t.is_int = true;
    t.num = v;
    return t;
  }
};

struct Atom {
  std::string pred;
  std::vector<Term> args;
};

enum class GuardOp { eq, ne, lt, le };

struct Literal {
  enum class Kind { pos_atom, neg_atom, guard, builtin };
  Kind kind = Kind::pos_atom;
  Atom atom;        // pos_atom / neg_atom / builtin (sum, abs, mod)
  GuardOp op = GuardOp::eq;
  Term lhs, rhs;    // guard
};

struct Rule {
  Atom head;
  std::vector<Literal> body;
  bool is_ic = false;
  int line = 0;
};

struct ParsedTheory {
  SlotSchema schema;
  std::vector<std::string> outcomes;
  std::vector<Rule> rules;
};

inline bool is_builtin_pred(const std::string& p) {
  return p == "sum" || p == "abs" || p == "mod";
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

namespace detail {

struct Token {
  enum class Type {
    ident,      // lowercase-leading
    variable,   // uppercase/underscore-leading
    integer,
    lbrace, rbrace, lparen, rparen,
    comma, colon, period, implies,  // ":-"
    op_eq, op_ne, op_lt, op_le, op_gt, op_ge,
    dotdot,
    eof,
  };
  Type type;
  std::string text;
  long long num = 0;
  int line = 1, col = 1;
};

class Lexer {
public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    skip_ws();
    Token t;
    t.line = line_;
    t.col = col_;
    if (pos_ >= src_.size()) {
      t.type = Token::Type::eof;
      return t;
    }
    char c = src_[pos_];
    if (c == '%') {
      while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      return next();
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '-' && pos_ + 1 < src_.size() &&
         std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
      return lex_int(t);
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string word;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
              src_[pos_] == '_')) {
        word.push_back(src_[pos_]);
        advance();
      }
      t.type = (std::isupper(static_cast<unsigned char>(word[0])) || word[0] == '_')
                   ? Token::Type::variable
                   : Token::Type::ident;
      t.text = std::move(word);
      return t;
    }
    switch (c) {
      case '{': advance(); t.type = Token::Type::lbrace; return t;
      case '}': advance(); t.type = Token::Type::rbrace; return t;
      case '(': advance(); t.type = Token::Type::lparen; return t;
      case ')': advance(); t.type = Token::Type::rparen; return t;
      case ',': advance(); t.type = Token::Type::comma; return t;
      case ':':
        advance();
        if (peek() == '-') {
          advance();
          t.type = Token::Type::implies;
        } else {
          t.type = Token::Type::colon;
        }
        return t;
      case '.':
        advance();
        if (peek() == '.') {
          advance();
          t.type = Token::Type::dotdot;
        } else {
          t.type = Token::Type::period;
        }
        return t;
      case '=': advance(); t.type = Token::Type::op_eq; return t;
      case '!':
        advance();
        if (peek() == '=') {
          advance();
          t.type = Token::Type::op_ne;
          return t;
        }
        throw ParseError("stray '!'", t.line, t.col);
      case '<':
        advance();
        if (peek() == '=') {
          advance();
          t.type = Token::Type::op_le;
        } else {
          t.type = Token::Type::op_lt;
        }
        return t;
      case '>':
        advance();
        if (peek() == '=') {
          advance();
          t.type = Token::Type::op_ge;
        } else {
          t.type = Token::Type::op_gt;
        }
        return t;
      default:
        throw ParseError(std::string("unexpected character '") + c + "'",
                         t.line, t.col);
    }
  }

private:
  Token lex_int(Token& t) {
    std::string word;
    if (src_[pos_] == '-') {
      word.push_back('-');
      advance();
    }
    while (pos_ < src_.size() &&
           std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
      word.push_back(src_[pos_]);
      advance();
    }
    t.type = Token::Type::integer;
    t.text = word;
    t.num = std::stoll(word);
    return t;
  }

  char peek() const { return pos_ < src_.size() ? src_[pos_] : '\0'; }
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }
  void skip_ws() {
    while (pos_ < src_.size() &&
           std::isspace(static_cast<unsigned char>(src_[pos_])))
      advance();
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1, col_ = 1;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

class TheoryParser {
public:
  explicit TheoryParser(std::string_view src) : lex_(src) { shift(); }

  ParsedTheory parse() {
    ParsedTheory out;
    bool saw_statement = false;
    std::vector<SlotSchema::Slot> slots;
    while (cur_.type != detail::Token::Type::eof) {
      saw_statement = true;
      if (cur_.type == detail::Token::Type::ident && cur_.text == "slot") {
        shift();
        slots.push_back(parse_slot_decl());
      } else if (cur_.type == detail::Token::Type::ident &&
                 cur_.text == "outcome") {
        shift();
        parse_outcome_decl(out.outcomes);
      } else if (cur_.type == detail::Token::Type::ident &&
                 cur_.text == "rule") {
        shift();
        out.rules.push_back(parse_rule(false));
      } else if (cur_.type == detail::Token::Type::ident && cur_.text == "ic") {
        out.rules.push_back(parse_rule(true));
      } else {
        throw ParseError("expected 'slot', 'outcome', 'rule' or 'ic', got '" +
                             cur_.text + "'",
                         cur_.line, cur_.col);
      }
    }
    if (!saw_statement)
      throw ParseError("empty theory source", 1, 1);
    out.schema = SlotSchema(std::move(slots));
    out.schema.validate();
    validate(out);
    return out;
  }

private:
  SlotSchema::Slot parse_slot_decl() {
    SlotSchema::Slot s;
    s.name = expect_ident("slot id");
    expect(detail::Token::Type::colon, "':'");
    expect(detail::Token::Type::lbrace, "'{'");
    parse_value_list(s.values);
    expect(detail::Token::Type::rbrace, "'}'");
    return s;
  }

  void parse_outcome_decl(std::vector<std::string>& outcomes) {
    expect(detail::Token::Type::colon, "':'");
    expect(detail::Token::Type::lbrace, "'{'");
    parse_value_list(outcomes);
    expect(detail::Token::Type::rbrace, "'}'");
  }

  void parse_value_list(std::vector<std::string>& out) {
    for (;;) {
      if (cur_.type == detail::Token::Type::ident) {
        out.push_back(cur_.text);
        shift();
      } else if (cur_.type == detail::Token::Type::integer) {
        long long lo = cur_.num;
        shift();
        if (cur_.type == detail::Token::Type::dotdot) {
          shift();
          if (cur_.type != detail::Token::Type::integer)
            throw ParseError("expected integer after '..'", cur_.line, cur_.col);
          long long hi = cur_.num;
          shift();
          if (hi < lo)
            throw ParseError("descending range", cur_.line, cur_.col);
          for (long long v = lo; v <= hi; ++v) out.push_back(std::to_string(v));
        } else {
          out.push_back(std::to_string(lo));
        }
      } else {
        throw ParseError("expected value symbol", cur_.line, cur_.col);
      }
      if (cur_.type == detail::Token::Type::comma) {
        shift();
        continue;
      }
      break;
    }
  }

  Rule parse_rule(bool is_ic) {
    Rule r;
    r.is_ic = is_ic;
    r.line = cur_.line;
    if (is_ic) {
      // "ic" token is current
      shift();
      r.head.pred = "ic";
      expect(detail::Token::Type::implies, "':-'");
      parse_body(r.body);
    } else {
      r.head = parse_atom();
      if (cur_.type == detail::Token::Type::implies) {
        shift();
        parse_body(r.body);
      }
    }
    expect(detail::Token::Type::period, "'.'");
    return r;
  }

  void parse_body(std::vector<Literal>& body) {
    for (;;) {
      body.push_back(parse_literal());
      if (cur_.type == detail::Token::Type::comma) {
        shift();
        continue;
      }
      break;
    }
  }

  Literal parse_literal() {
    Literal lit;
    if (cur_.type == detail::Token::Type::ident && cur_.text == "not") {
      int line = cur_.line, col = cur_.col;
      shift();
      lit.kind = Literal::Kind::neg_atom;
      lit.atom = parse_atom();
      if (is_builtin_pred(lit.atom.pred))
        throw ParseError("cannot negate builtin " + lit.atom.pred, line, col);
      return lit;
    }
    // Either an atom or a guard whose lhs is a term.
    if (cur_.type == detail::Token::Type::ident) {
      detail::Token save = cur_;
      shift();
      if (cur_.type == detail::Token::Type::lparen) {
        lit.atom.pred = save.text;
        parse_arg_list(lit.atom.args);
        lit.kind = is_builtin_pred(lit.atom.pred) ? Literal::Kind::builtin
                                                  : Literal::Kind::pos_atom;
        if (lit.kind == Literal::Kind::builtin && lit.atom.args.size() != 3)
          throw ParseError(lit.atom.pred + " expects 3 arguments", save.line,
                           save.col);
        return lit;
      }
      if (is_guard_op(cur_.type)) {
        return parse_guard_rest(Term::name(save.text));
      }
      lit.kind = Literal::Kind::pos_atom;
      lit.atom.pred = save.text;
      return lit;
    }
    if (cur_.type == detail::Token::Type::variable ||
        cur_.type == detail::Token::Type::integer) {
      Term lhs = parse_term();
      if (!is_guard_op(cur_.type))
        throw ParseError("expected comparison operator", cur_.line, cur_.col);
      return parse_guard_rest(lhs);
    }
    throw ParseError("expected literal", cur_.line, cur_.col);
  }

  Literal parse_guard_rest(Term lhs) {
    auto op_tok = cur_.type;
    shift();
    Term rhs = parse_term();
    Literal lit;
    lit.kind = Literal::Kind::guard;
    switch (op_tok) {
      case detail::Token::Type::op_eq: lit.op = GuardOp::eq; break;
      case detail::Token::Type::op_ne: lit.op = GuardOp::ne; break;
      case detail::Token::Type::op_lt: lit.op = GuardOp::lt; break;
      case detail::Token::Type::op_le: lit.op = GuardOp::le; break;
      case detail::Token::Type::op_gt:
        lit.op = GuardOp::lt;
        std::swap(lhs, rhs);
        break;
      case detail::Token::Type::op_ge:
        lit.op = GuardOp::le;
        std::swap(lhs, rhs);
        break;
      default:
        throw ParseError("expected comparison operator", cur_.line, cur_.col);
    }
    lit.lhs = std::move(lhs);
    lit.rhs = std::move(rhs);
    return lit;
  }

  Atom parse_atom() {
    Atom a;
    if (cur_.type != detail::Token::Type::ident)
      throw ParseError("expected predicate name", cur_.line, cur_.col);
    a.pred = cur_.text;
    shift();
    if (cur_.type == detail::Token::Type::lparen) parse_arg_list(a.args);
    return a;
  }

  void parse_arg_list(std::vector<Term>& args) {
    expect(detail::Token::Type::lparen, "'('");
    for (;;) {
      args.push_back(parse_term());
      if (cur_.type == detail::Token::Type::comma) {
        shift();
        continue;
      }
      break;
    }
    expect(detail::Token::Type::rparen, "')'");
  }

  Term parse_term() {
    Term t;
    switch (cur_.type) {
      case detail::Token::Type::ident: t = Term::name(cur_.text); break;
      case detail::Token::Type::variable: t = Term::var(cur_.text); break;
      case detail::Token::Type::integer: t = Term::integer(cur_.num); break;
      default:
        throw ParseError("expected term", cur_.line, cur_.col);
    }
    shift();
    return t;
  }

  static bool is_guard_op(detail::Token::Type t) {
    using T = detail::Token::Type;
    return t == T::op_eq || t == T::op_ne || t == T::op_lt || t == T::op_le ||
           t == T::op_gt || t == T::op_ge;
  }

  std::string expect_ident(const char* what) {
    if (cur_.type != detail::Token::Type::ident)
      throw ParseError(std::string("expected ") + what, cur_.line, cur_.col);
    std::string s = cur_.text;
    shift();
    return s;
  }

  void expect(detail::Token::Type t, const char* what) {
    if (cur_.type != t)
      throw ParseError(std::string("expected ") + what + ", got '" + cur_.text +
                           "'",
                       cur_.line, cur_.col);
    shift();
  }

  void shift() { cur_ = lex_.next(); }

  // ----- semantic validation ------------------------------------------------

  void validate(const ParsedTheory& t) {
    std::set<std::string> outcome_set(t.outcomes.begin(), t.outcomes.end());
    if (outcome_set.size() != t.outcomes.size())
      throw ParseError("duplicate outcome atom");
    std::set<std::string> slot_names;
    for (const auto& s : t.schema.slots()) slot_names.insert(s.name);

    for (const auto& r : t.rules) {
      validate_head(t, r, outcome_set);
      validate_range_restriction(r);
      for (const auto& lit : r.body)
        if (lit.kind == Literal::Kind::pos_atom ||
            lit.kind == Literal::Kind::neg_atom)
          validate_atom(t, r, lit.atom, slot_names, outcome_set);
    }
    check_stratification(t);
  }

  void validate_head(const ParsedTheory& t, const Rule& r,
                     const std::set<std::string>& outcomes) {
    if (r.is_ic) return;
    if (r.head.pred == "val")
      throw ParseError("abducible atoms cannot be rule heads", r.line, 0);
    if (r.head.pred == "ic" || is_builtin_pred(r.head.pred))
      throw ParseError("reserved predicate in rule head: " + r.head.pred,
                       r.line, 0);
    if (outcomes.count(r.head.pred) && !r.head.args.empty())
      throw ParseError("outcome atom " + r.head.pred + " must have arity 0",
                       r.line, 0);
    if (r.body.empty()) {
      for (const auto& a : r.head.args)
        if (a.kind == Term::Kind::variable)
          throw ParseError("fact head must be ground", r.line, 0);
    }
  }

  void validate_atom(const ParsedTheory& t, const Rule& r, const Atom& a,
                     const std::set<std::string>& slot_names,
                     const std::set<std::string>& outcomes) {
    if (a.pred == "val") {
      if (a.args.size() != 2)
        throw ParseError("val expects 2 arguments", r.line, 0);
      const Term& s = a.args[0];
      const Term& v = a.args[1];
      if (s.kind == Term::Kind::constant && !slot_names.count(s.text))
        throw ParseError("unknown slot: " + s.text, r.line, 0);
      if (v.kind == Term::Kind::constant) {
        if (s.kind == Term::Kind::constant) {
          int si = t.schema.slot_index(s.text);
          if (t.schema.value_index(static_cast<std::size_t>(si), v.text) < 0)
            throw ParseError("value " + v.text + " not in domain of slot " +
                                 s.text,
                             r.line, 0);
        } else {
          bool anywhere = false;
          for (const auto& sl : t.schema.slots())
            for (const auto& dv : sl.values) anywhere |= (dv == v.text);
          if (!anywhere)
            throw ParseError("value " + v.text + " not in any slot domain",
                             r.line, 0);
        }
      }
    } else if (outcomes.count(a.pred) && !a.args.empty()) {
      throw ParseError("outcome atom " + a.pred + " must have arity 0", r.line,
                       0);
    }
  }

  // Every variable must occur in a positive atom or a builtin argument.
  void validate_range_restriction(const Rule& r) {
    std::set<std::string> bindable;
    for (const auto& lit : r.body) {
      if (lit.kind == Literal::Kind::pos_atom ||
          lit.kind == Literal::Kind::builtin)
        for (const auto& arg : lit.atom.args)
          if (arg.kind == Term::Kind::variable) bindable.insert(arg.text);
      if (lit.kind == Literal::Kind::guard && lit.op == GuardOp::eq) {
        if (lit.lhs.kind == Term::Kind::variable) bindable.insert(lit.lhs.text);
        if (lit.rhs.kind == Term::Kind::variable) bindable.insert(lit.rhs.text);
      }
    }
    auto check = [&](const Term& term) {
      if (term.kind == Term::Kind::variable && !bindable.count(term.text))
        throw ParseError("variable " + term.text + " is not range-restricted",
                         r.line, 0);
    };
    for (const auto& arg : r.head.args) check(arg);
    for (const auto& lit : r.body) {
      if (lit.kind == Literal::Kind::neg_atom)
        for (const auto& arg : lit.atom.args) check(arg);
      if (lit.kind == Literal::Kind::guard) {
        check(lit.lhs);
        check(lit.rhs);
      }
    }
  }

  // Predicate-level stratification: no negated dependency inside a cycle.
  void check_stratification(const ParsedTheory& t) {
    std::set<std::string> defined;
    for (const auto& r : t.rules)
      if (!r.is_ic) defined.insert(r.head.pred);
    // adjacency: head -> body preds (defined only), with negation flag
    std::map<std::string, std::vector<std::pair<std::string, bool>>> deps;
    for (const auto& r : t.rules) {
      if (r.is_ic) continue;
      for (const auto& lit : r.body) {
        if (lit.kind != Literal::Kind::pos_atom &&
            lit.kind != Literal::Kind::neg_atom)
          continue;
        if (!defined.count(lit.atom.pred)) continue;
        deps[r.head.pred].emplace_back(lit.atom.pred,
                                       lit.kind == Literal::Kind::neg_atom);
      }
    }
    // For every negated edge head -> p, p must not (transitively) reach head.
    for (const auto& [head, edges] : deps) {
      for (const auto& [p, negated] : edges) {
        if (!negated) continue;
        if (reaches(deps, p, head))
          throw StratificationError(
              "cyclic negated dependency through predicate " + p);
      }
    }
  }

  static bool reaches(
      const std::map<std::string, std::vector<std::pair<std::string, bool>>>&
          deps,
      const std::string& from, const std::string& to) {
    std::set<std::string> seen;
    std::vector<std::string> stack{from};
    while (!stack.empty()) {
      std::string cur = stack.back();
      stack.pop_back();
      if (cur == to) return true;
      if (!seen.insert(cur).second) continue;
      auto it = deps.find(cur);
      if (it == deps.end()) continue;
      for (const auto& [next, neg] : it->second) stack.push_back(next);
    }
    return false;
  }

  detail::Lexer lex_;
  detail::Token cur_;
};

inline ParsedTheory parse_theory(std::string_view source) {
  return TheoryParser(source).parse();
}

}  // namespace nsl
