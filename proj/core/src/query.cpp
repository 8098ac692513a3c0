#include "prefdb/query.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <utility>

#include "prefdb/error.hpp"

namespace prefdb {

namespace {

struct Token {
  enum class Kind {
    Ident,
    Number,
    Quoted,
    Wildcard,
    LParen,
    RParen,
    Comma,
    Semicolon,
    Arrow,
    Cmp,
    End,
  };
  Kind kind;
  std::string text;
  int line, col;
};

class Lexer {
 public:
  explicit Lexer(const std::string& text) : text_(text) {}

  Token next() {
    skip_ws();
    int line = line_, col = col_;
    if (at_ >= text_.size()) return {Token::Kind::End, "", line, col};
    char c = text_[at_];
    if (c == '(') return take(Token::Kind::LParen, 1);
    if (c == ')') return take(Token::Kind::RParen, 1);
    if (c == ',') return take(Token::Kind::Comma, 1);
    if (c == ';') return take(Token::Kind::Semicolon, 1);
    if (c == '<') {
      if (peek(1) == '-') return take(Token::Kind::Arrow, 2);
      if (peek(1) == '=') return take(Token::Kind::Cmp, 2);
      return take(Token::Kind::Cmp, 1);
    }
    if (c == '>') {
      if (peek(1) == '=') return take(Token::Kind::Cmp, 2);
      return take(Token::Kind::Cmp, 1);
    }
    if (c == '=') return take(Token::Kind::Cmp, 1);
    if (c == '\'') {
      std::size_t end = text_.find('\'', at_ + 1);
      if (end == std::string::npos)
        throw ParseError("unterminated quoted literal", line, col);
      std::string body = text_.substr(at_ + 1, end - at_ - 1);
      advance(end + 1 - at_);
      return {Token::Kind::Quoted, body, line, col};
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '-' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
      std::size_t len = c == '-' ? 1 : 0;
      bool dot = false;
      while (at_ + len < text_.size()) {
        char d = text_[at_ + len];
        if (d == '.' && !dot) {
          dot = true;
          ++len;
        } else if (std::isdigit(static_cast<unsigned char>(d))) {
          ++len;
        } else {
          break;
        }
      }
      std::string body = text_.substr(at_, len);
      advance(len);
      return {Token::Kind::Number, body, line, col};
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t len = 0;
      while (at_ + len < text_.size()) {
        char d = text_[at_ + len];
        if (std::isalnum(static_cast<unsigned char>(d)) || d == '_')
          ++len;
        else
          break;
      }
      std::string body = text_.substr(at_, len);
      advance(len);
      if (body == "_") return {Token::Kind::Wildcard, body, line, col};
      return {Token::Kind::Ident, body, line, col};
    }
    throw ParseError(std::string("unexpected character '") + c + "'", line, col);
  }

 private:
  char peek(std::size_t ahead) const {
    return at_ + ahead < text_.size() ? text_[at_ + ahead] : '\0';
  }
  Token take(Token::Kind kind, std::size_t len) {
    Token t{kind, text_.substr(at_, len), line_, col_};
    advance(len);
    return t;
  }
  void advance(std::size_t len) {
    for (std::size_t k = 0; k < len && at_ < text_.size(); ++k, ++at_) {
      if (text_[at_] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
    }
  }
  void skip_ws() {
    while (at_ < text_.size()) {
      char c = text_[at_];
      if (c == '#') {
        while (at_ < text_.size() && text_[at_] != '\n') advance(1);
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance(1);
      } else {
        break;
      }
    }
  }

  const std::string& text_;
  std::size_t at_ = 0;
  int line_ = 1, col_ = 1;
};

class Parser {
 public:
  explicit Parser(const std::string& text) : lex_(text) { shift(); }

  Query parse() {
    Query q;
    q.head = expect(Token::Kind::Ident, "query name").text;
    expect(Token::Kind::LParen, "'('");
    expect(Token::Kind::RParen, "')'");
    Token arrow = expect(Token::Kind::Arrow, "'<-'");
    if (arrow.text != "<-")
      throw ParseError("expected '<-' after the query head", arrow.line, arrow.col);
    parse_atom(q);
    while (cur_.kind == Token::Kind::Comma) {
      shift();
      parse_atom(q);
    }
    if (cur_.kind == Token::Kind::Semicolon) shift();  // optional terminator
    if (cur_.kind != Token::Kind::End)
      throw ParseError("unexpected input after the query body", cur_.line, cur_.col);
    return q;
  }

 private:
  void parse_atom(Query& q) {
    if (cur_.kind == Token::Kind::Ident) {
      Token name = cur_;
      Token after = peek_;
      if (after.kind == Token::Kind::LParen) {
        shift();
        shift();
        parse_relation_atom(q, name.text);
        return;
      }
    }
    // otherwise: comparison `term CMP constant`
    Term lhs = parse_term();
    Token op = expect(Token::Kind::Cmp, "comparison operator");
    if (op.text == "<-")
      throw ParseError("unexpected '<-'", op.line, op.col);
    Term rhs = parse_term();
    if (rhs.is_variable())
      throw ParseError("right side of a comparison must be a constant",
                       op.line, op.col);
    q.comparisons.push_back({std::move(lhs), op.text, std::move(rhs)});
  }

  void parse_relation_atom(Query& q, const std::string& relation) {
    std::vector<Term> first = parse_termlist();
    if (cur_.kind == Token::Kind::Semicolon) {
      shift();
      Term left = parse_term();
      Token sep = expect(Token::Kind::Semicolon, "';'");
      (void)sep;
      Term right = parse_term();
      expect(Token::Kind::RParen, "')'");
      q.p_atoms.push_back(
          {relation, std::move(first), std::move(left), std::move(right)});
      return;
    }
    expect(Token::Kind::RParen, "')'");
    q.o_atoms.push_back({relation, std::move(first)});
  }

  std::vector<Term> parse_termlist() {
    std::vector<Term> out;
    out.push_back(parse_term());
    while (cur_.kind == Token::Kind::Comma) {
      shift();
      out.push_back(parse_term());
    }
    return out;
  }

  Term parse_term() {
    Token t = cur_;
    switch (t.kind) {
      case Token::Kind::Wildcard:
        shift();
        return Term::variable("_" + std::to_string(++anon_), true);
      case Token::Kind::Ident:
        shift();
        return Term::variable(t.text);
      case Token::Kind::Quoted:
        shift();
        return Term::constant(t.text);
      case Token::Kind::Number:
        shift();
        return Term::constant(t.text, true);
      default:
        throw ParseError("expected a term", t.line, t.col);
    }
  }

  Token expect(Token::Kind kind, const std::string& what) {
    if (cur_.kind != kind)
      throw ParseError("expected " + what, cur_.line, cur_.col);
    Token t = cur_;
    shift();
    return t;
  }

  void shift() {
    if (!primed_) {
      cur_ = lex_.next();
      peek_ = lex_.next();
      primed_ = true;
      return;
    }
    cur_ = peek_;
    peek_ = lex_.next();
  }

  Lexer lex_;
  Token cur_{Token::Kind::End, "", 1, 1}, peek_{Token::Kind::End, "", 1, 1};
  bool primed_ = false;
  int anon_ = 0;
};

}  // namespace

Query parse_query(const std::string& text) { return Parser(text).parse(); }

std::string to_string(const Term& t) {
  if (t.is_variable()) return t.anonymous ? "_" : t.text;
  if (t.numeric) return t.text;
  return "'" + t.text + "'";
}

std::string to_string(const Query& q) {
  std::string out = q.head + "() <- ";
  bool first = true;
  auto sep = [&] {
    if (!first) out += ", ";
    first = false;
  };
  for (const auto& p : q.p_atoms) {
    sep();
    out += p.relation + "(";
    for (std::size_t i = 0; i < p.session.size(); ++i) {
      if (i) out += ",";
      out += to_string(p.session[i]);
    }
    out += ";" + to_string(p.left) + ";" + to_string(p.right) + ")";
  }
  for (const auto& o : q.o_atoms) {
    sep();
    out += o.relation + "(";
    for (std::size_t i = 0; i < o.args.size(); ++i) {
      if (i) out += ",";
      out += to_string(o.args[i]);
    }
    out += ")";
  }
  for (const auto& c : q.comparisons) {
    sep();
    out += to_string(c.lhs) + " " + c.op + " " + to_string(c.rhs);
  }
  return out;
}

bool compare_values(const std::string& lhs, const std::string& op,
                    const std::string& rhs) {
  auto as_number = [](const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
  };
  double a, b;
  int cmp;
  if (as_number(lhs, a) && as_number(rhs, b))
    cmp = a < b ? -1 : (a > b ? 1 : 0);
  else
    cmp = lhs.compare(rhs) < 0 ? -1 : (lhs.compare(rhs) > 0 ? 1 : 0);
  if (op == "=") return cmp == 0;
  if (op == "<") return cmp < 0;
  if (op == "<=") return cmp <= 0;
  if (op == ">") return cmp > 0;
  if (op == ">=") return cmp >= 0;
  throw Error("unknown comparison operator '" + op + "'");
}

}  // namespace prefdb
