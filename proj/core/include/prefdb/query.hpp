#pragma once
// conjunctive-query AST and parser

#include <string>
#include <vector>

namespace prefdb {

struct Term {
  enum class Kind { Variable, Constant };
  Kind kind = Kind::Variable;
  std::string text;       // variable name or constant value
  bool numeric = false;   // constant written as a bare number
  bool anonymous = false; // variable introduced for a `_`

  static Term variable(std::string name, bool anon = false) {
    Term t;
    t.kind = Kind::Variable;
    t.text = std::move(name);
    t.anonymous = anon;
    return t;
  }
  static Term constant(std::string value, bool numeric = false) {
    Term t;
    t.kind = Kind::Constant;
    t.text = std::move(value);
    t.numeric = numeric;
    return t;
  }
  bool is_variable() const { return kind == Kind::Variable; }
  bool is_constant() const { return kind == Kind::Constant; }
  bool operator==(const Term& o) const {
    return kind == o.kind && text == o.text;
  }
};

// preference atom: R(session terms; left item; right item)
struct PAtom {
  std::string relation;
  std::vector<Term> session;
  Term left;
  Term right;
};

// ordinary atom: R(term, term, ...)
struct OAtom {
  std::string relation;
  std::vector<Term> args;
};

struct Comparison {
  Term lhs;
  std::string op;  // one of = < <= > >=
  Term rhs;
};

struct Query {
  std::string head;
  std::vector<PAtom> p_atoms;
  std::vector<OAtom> o_atoms;
  std::vector<Comparison> comparisons;
};

// Parses one query; `#` starts a comment. Throws ParseError with 1-based
// line/column on malformed input.
Query parse_query(const std::string& text);

std::string to_string(const Term& t);
std::string to_string(const Query& q);

// Compares two values the way the engine does everywhere: numerically when
// both parse as numbers, lexicographically otherwise.
bool compare_values(const std::string& lhs, const std::string& op,
                    const std::string& rhs);

}  // namespace prefdb
