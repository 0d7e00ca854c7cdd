#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

// Small boolean/arithmetic language for convergence tests over the run
// history, e.g.  iteration > 3 and max(recent('ecov', 3)) < 0.1
//
//   expr    := or
//   or      := and ("or" and)*
//   and     := not ("and" not)*
//   not     := "not" not | compare
//   compare := sum (("<" | "<=" | ">" | ">=" | "==" | "!=") sum)?
//   sum     := product (("+" | "-") product)*
//   product := unary (("*" | "/") unary)*
//   unary   := "-" unary | primary
//   primary := number | "iteration" | "true" | "false" | "(" expr ")"
//            | name "(" args ")"
//
// Functions: recent('metric', w) -> series of the last w values,
// latest('metric'), and max/min/mean/sum/len over a series, abs(x).

namespace surropt::stop {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, std::size_t pos)
      : std::runtime_error(msg + " at column " + std::to_string(pos + 1)), pos_(pos) {}
  [[nodiscard]] std::size_t position() const noexcept { return pos_; }

 private:
  std::size_t pos_;
};

using Series = std::vector<double>;
using Value = std::variant<double, Series>;

/// What an expression can see.
struct Context {
  std::size_t iteration = 0;
  std::function<Series(std::string_view)> metric;
};

[[nodiscard]] inline std::vector<std::string> metric_names() {
  return {"hv", "ecov", "feasible", "evals", "nrmse"};
}

namespace detail {

struct Node {
  enum class Kind { number, iteration, unary, binary, call, text } kind = Kind::number;
  double number = 0.0;
  std::string op;  // operator or function name, or literal text
  std::vector<std::unique_ptr<Node>> args;
};

using NodePtr = std::unique_ptr<Node>;

struct Token {
  enum class Kind { number, name, string, op, end } kind = Kind::end;
  std::string text;
  double number = 0.0;
  std::size_t pos = 0;
};

inline std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    Token t;
    t.pos = i;
    if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
      const auto r = std::from_chars(s.data() + i, s.data() + s.size(), t.number);
      if (r.ec != std::errc()) throw ParseError("bad number", i);
      t.kind = Token::Kind::number;
      t.text = std::string(s.substr(i, static_cast<std::size_t>(r.ptr - (s.data() + i))));
      i = static_cast<std::size_t>(r.ptr - s.data());
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
      t.kind = Token::Kind::name;
      t.text = std::string(s.substr(i, j - i));
      i = j;
    } else if (c == '\'' || c == '"') {
      const std::size_t j = s.find(c, i + 1);
      if (j == std::string_view::npos) throw ParseError("unterminated string", i);
      t.kind = Token::Kind::string;
      t.text = std::string(s.substr(i + 1, j - i - 1));
      i = j + 1;
    } else {
      static constexpr std::string_view two[] = {"<=", ">=", "==", "!="};
      t.kind = Token::Kind::op;
      bool matched = false;
      for (auto op : two)
        if (s.substr(i, 2) == op) {
          t.text = std::string(op);
          i += 2;
          matched = true;
          break;
        }
      if (!matched) {
        if (std::string_view("<>+-*/(),").find(c) == std::string_view::npos)
          throw ParseError(std::string("unexpected character '") + c + "'", i);
        t.text = std::string(1, c);
        ++i;
      }
    }
    out.push_back(std::move(t));
  }
  out.push_back({Token::Kind::end, "", 0.0, s.size()});
  return out;
}

class Parser {
 public:
  explicit Parser(std::string_view src) : toks_(tokenize(src)) {}

  NodePtr parse() {
    auto e = parse_or();
    if (peek().kind != Token::Kind::end) throw ParseError("unexpected '" + peek().text + "'", peek().pos);
    return e;
  }

 private:
  const Token& peek() const { return toks_[i_]; }
  bool accept_name(std::string_view w) {
    if (peek().kind == Token::Kind::name && peek().text == w) {
      ++i_;
      return true;
    }
    return false;
  }
  bool accept_op(std::string_view w) {
    if (peek().kind == Token::Kind::op && peek().text == w) {
      ++i_;
      return true;
    }
    return false;
  }
  void expect_op(std::string_view w) {
    if (!accept_op(w)) throw ParseError("expected '" + std::string(w) + "'", peek().pos);
  }

  static NodePtr binary(std::string op, NodePtr a, NodePtr b) {
    auto n = std::make_unique<Node>();
    n->kind = Node::Kind::binary;
    n->op = std::move(op);
    n->args.push_back(std::move(a));
    n->args.push_back(std::move(b));
    return n;
  }

  NodePtr parse_or() {
    auto a = parse_and();
    while (accept_name("or")) a = binary("or", std::move(a), parse_and());
    return a;
  }
  NodePtr parse_and() {
    auto a = parse_not();
    while (accept_name("and")) a = binary("and", std::move(a), parse_not());
    return a;
  }
  NodePtr parse_not() {
    if (accept_name("not")) {
      auto n = std::make_unique<Node>();
      n->kind = Node::Kind::unary;
      n->op = "not";
      n->args.push_back(parse_not());
      return n;
    }
    return parse_compare();
  }
  NodePtr parse_compare() {
    auto a = parse_sum();
    for (const char* op : {"<=", ">=", "==", "!=", "<", ">"})
      if (accept_op(op)) return binary(op, std::move(a), parse_sum());
    return a;
  }
  NodePtr parse_sum() {
    auto a = parse_product();
    for (;;) {
      if (accept_op("+")) a = binary("+", std::move(a), parse_product());
      else if (accept_op("-")) a = binary("-", std::move(a), parse_product());
      else return a;
    }
  }
  NodePtr parse_product() {
    auto a = parse_unary();
    for (;;) {
      if (accept_op("*")) a = binary("*", std::move(a), parse_unary());
      else if (accept_op("/")) a = binary("/", std::move(a), parse_unary());
      else return a;
    }
  }
  NodePtr parse_unary() {
    if (accept_op("-")) {
      auto n = std::make_unique<Node>();
      n->kind = Node::Kind::unary;
      n->op = "-";
      n->args.push_back(parse_unary());
      return n;
    }
    return parse_primary();
  }
  NodePtr parse_primary() {
    const Token t = peek();
    auto n = std::make_unique<Node>();
    if (t.kind == Token::Kind::number) {
      ++i_;
      n->number = t.number;
      return n;
    }
    if (accept_op("(")) {
      auto e = parse_or();
      expect_op(")");
      return e;
    }
    if (t.kind == Token::Kind::string) {
      ++i_;
      n->kind = Node::Kind::text;
      n->op = t.text;
      return n;
    }
    if (t.kind != Token::Kind::name) throw ParseError("unexpected '" + t.text + "'", t.pos);
    ++i_;
    if (t.text == "iteration") {
      n->kind = Node::Kind::iteration;
      return n;
    }
    if (t.text == "true" || t.text == "false") {
      n->number = t.text == "true" ? 1.0 : 0.0;
      return n;
    }
    static const std::vector<std::string> functions = {"recent", "latest", "max", "min", "mean", "sum", "len", "abs"};
    if (std::find(functions.begin(), functions.end(), t.text) == functions.end())
      throw ParseError("unknown name '" + t.text + "'", t.pos);
    n->kind = Node::Kind::call;
    n->op = t.text;
    expect_op("(");
    if (!accept_op(")")) {
      n->args.push_back(parse_or());
      while (accept_op(",")) n->args.push_back(parse_or());
      expect_op(")");
    }
    check_call(*n, t.pos);
    return n;
  }

  static void check_call(const Node& n, std::size_t pos) {
    const std::size_t want = n.op == "recent" ? 2 : 1;
    if (n.args.size() != want)
      throw ParseError(n.op + "() takes " + std::to_string(want) + " argument" + (want == 1 ? "" : "s"), pos);
    if (n.op == "recent" || n.op == "latest") {
      if (n.args[0]->kind != Node::Kind::text) throw ParseError(n.op + "() needs a quoted metric name", pos);
      const auto names = metric_names();
      if (std::find(names.begin(), names.end(), n.args[0]->op) == names.end())
        throw ParseError("unknown metric '" + n.args[0]->op + "'", pos);
    }
  }

  std::vector<Token> toks_;
  std::size_t i_ = 0;
};

inline double scalar(const Value& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  throw std::runtime_error("stop expression: a series was used where a number is needed");
}

inline Value eval(const Node& n, const Context& ctx) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  switch (n.kind) {
    case Node::Kind::number: return n.number;
    case Node::Kind::iteration: return static_cast<double>(ctx.iteration);
    case Node::Kind::text: throw std::runtime_error("stop expression: stray string '" + n.op + "'");
    case Node::Kind::unary: {
      const double a = scalar(eval(*n.args[0], ctx));
      return n.op == "not" ? (a != 0.0 ? 0.0 : 1.0) : -a;
    }
    case Node::Kind::binary: {
      const double a = scalar(eval(*n.args[0], ctx));
      if (n.op == "and" && a == 0.0) return 0.0;
      if (n.op == "or" && a != 0.0) return 1.0;
      const double b = scalar(eval(*n.args[1], ctx));
      if (n.op == "and" || n.op == "or") return b != 0.0 ? 1.0 : 0.0;
      if (n.op == "+") return a + b;
      if (n.op == "-") return a - b;
      if (n.op == "*") return a * b;
      if (n.op == "/") return a / b;
      if (n.op == "<") return a < b ? 1.0 : 0.0;
      if (n.op == "<=") return a <= b ? 1.0 : 0.0;
      if (n.op == ">") return a > b ? 1.0 : 0.0;
      if (n.op == ">=") return a >= b ? 1.0 : 0.0;
      if (n.op == "==") return a == b ? 1.0 : 0.0;
      return a != b ? 1.0 : 0.0;
    }
    case Node::Kind::call: {
      if (n.op == "recent" || n.op == "latest") {
        const Series all = ctx.metric ? ctx.metric(n.args[0]->op) : Series{};
        if (n.op == "latest") return all.empty() ? nan : all.back();
        const double w = scalar(eval(*n.args[1], ctx));
        const auto keep = static_cast<std::size_t>(std::max(0.0, std::floor(w)));
        return Series(all.end() - static_cast<std::ptrdiff_t>(std::min(keep, all.size())), all.end());
      }
      const Value v = eval(*n.args[0], ctx);
      if (n.op == "abs") return std::abs(scalar(v));
      const Series s = std::holds_alternative<Series>(v) ? std::get<Series>(v) : Series{std::get<double>(v)};
      if (n.op == "len") return static_cast<double>(s.size());
      if (n.op == "sum") return std::accumulate(s.begin(), s.end(), 0.0);
      if (s.empty()) return nan;
      if (n.op == "max") return *std::max_element(s.begin(), s.end());
      if (n.op == "min") return *std::min_element(s.begin(), s.end());
      return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    }
  }
  return nan;
}

}  // namespace detail

/// A parsed expression; parsing happens once, up front.
class Expression {
 public:
  Expression() = default;
  explicit Expression(std::string source) : source_(std::move(source)) {
    root_ = std::shared_ptr<const detail::Node>(detail::Parser(source_).parse());
  }

  [[nodiscard]] const std::string& source() const noexcept { return source_; }
  [[nodiscard]] bool empty() const noexcept { return !root_; }

  [[nodiscard]] bool operator()(const Context& ctx) const {
    if (!root_) return false;
    const double v = detail::scalar(detail::eval(*root_, ctx));
    return v != 0.0 && !std::isnan(v);
  }

 private:
  std::string source_;
  std::shared_ptr<const detail::Node> root_;
};

}  // namespace surropt::stop
