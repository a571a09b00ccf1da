// Parser and printer for the scene grammar in docs/scene_grammar.md.

#include "jetholo/scene.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

namespace jetholo {

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::vector<std::string> with_time(std::vector<std::string> names) {
  names.emplace_back(kTimeVar);
  return names;
}

class SceneParser {
 public:
  explicit SceneParser(std::string_view text) : text_(text) {}

  Scene parse(const SceneOptions& opts) {
    expect_keyword("chart");
    parse_chart();
    expect_keyword("bundle");
    parse_bundle();
    expect_keyword("foliation");
    parse_foliation();

    std::vector<ProjField> lifts;
    skip_ws();
    if (peek_keyword("connection")) {
      identifier();
      lifts = parse_connection();
    } else {
      for (int g = 0; g < static_cast<int>(generators_.size()); ++g)
        lifts.push_back(ProjField{generators_[g].a, std::vector<Expr>(fibre_names_.size(), Expr(0.0))});
    }

    std::vector<SectionDecl> sections;
    std::vector<PathDecl> paths;
    for (;;) {
      skip_ws();
      if (pos_ >= text_.size()) break;
      const std::size_t at = pos_;
      const std::string kw = identifier();
      if (kw == "section") {
        sections.push_back(parse_section(sections));
      } else if (kw == "path") {
        paths.push_back(parse_path(paths));
      } else {
        error_at("expected 'section' or 'path', found '" + kw + "'", at);
      }
    }

    Chart chart(chart_names_, Box(chart_box_));
    Bundle bundle(chart, fibre_names_, Box(fibre_box_));
    Foliation foliation(chart, generator_names_, generators_);
    Scene s{Connection(bundle, foliation, std::move(lifts)), std::move(sections), std::move(paths), {}};
    if (opts.validate) validate(s, opts);
    return s;
  }

 private:
  // ---- lexical helpers

  SourcePos where(std::size_t offset) const {
    SourcePos p;
    p.offset = offset;
    for (std::size_t i = 0; i < offset && i < text_.size(); ++i) {
      if (text_[i] == '\n') {
        ++p.line;
        p.column = 1;
      } else {
        ++p.column;
      }
    }
    return p;
  }

  [[noreturn]] void error_at(const std::string& msg, std::size_t at) const { throw ParseError(msg, where(at)); }
  [[noreturn]] void error(const std::string& msg) const { error_at(msg, pos_); }

  void skip_ws() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '#') {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  bool accept(char c) {
    if (peek() != c) return false;
    ++pos_;
    return true;
  }

  void expect(char c) {
    if (accept(c)) return;
    if (pos_ >= text_.size()) error(std::string("expected '") + c + "' but reached end of input");
    error(std::string("expected '") + c + "' but found '" + text_[pos_] + "'");
  }

  std::string identifier() {
    skip_ws();
    if (pos_ >= text_.size() || !ident_start(text_[pos_])) {
      if (pos_ >= text_.size()) error("expected an identifier but reached end of input");
      error(std::string("expected an identifier but found '") + text_[pos_] + "'");
    }
    const std::size_t start = pos_;
    while (pos_ < text_.size() && ident_char(text_[pos_])) ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  bool peek_keyword(std::string_view kw) {
    skip_ws();
    if (text_.substr(pos_, kw.size()) != kw) return false;
    const std::size_t end = pos_ + kw.size();
    return end >= text_.size() || !ident_char(text_[end]);
  }

  void expect_keyword(std::string_view kw) {
    skip_ws();
    const std::size_t at = pos_;
    if (pos_ >= text_.size()) error_at("expected '" + std::string(kw) + "' block but reached end of input", at);
    const std::string got = ident_start(text_[pos_]) ? identifier() : std::string(1, text_[pos_]);
    if (got != kw) error_at("expected '" + std::string(kw) + "' block, found '" + got + "'", at);
  }

  // Statement separator inside a block: ';' or the closing brace.
  bool end_statement() {
    if (accept(';')) return accept('}');
    if (accept('}')) return true;
    if (pos_ >= text_.size()) error("expected ';' or '}' but reached end of input");
    error(std::string("expected ';' or '}' but found '") + text_[pos_] + "'");
  }

  double number() {
    skip_ws();
    const std::size_t start = pos_;
    std::size_t end = pos_;
    if (end < text_.size() && (text_[end] == '-' || text_[end] == '+')) ++end;
    const std::size_t digits = end;
    while (end < text_.size() && std::isdigit(static_cast<unsigned char>(text_[end]))) ++end;
    if (end + 1 < text_.size() && text_[end] == '.' && std::isdigit(static_cast<unsigned char>(text_[end + 1]))) {
      ++end;
      while (end < text_.size() && std::isdigit(static_cast<unsigned char>(text_[end]))) ++end;
    }
    if (end == digits) error_at("expected a number", start);
    if (end < text_.size() && (text_[end] == 'e' || text_[end] == 'E')) {
      std::size_t e = end + 1;
      if (e < text_.size() && (text_[e] == '+' || text_[e] == '-')) ++e;
      if (e < text_.size() && std::isdigit(static_cast<unsigned char>(text_[e]))) {
        while (e < text_.size() && std::isdigit(static_cast<unsigned char>(text_[e]))) ++e;
        end = e;
      }
    }
    const std::size_t from = text_[start] == '+' ? start + 1 : start;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text_.data() + from, text_.data() + end, v);
    if (ec != std::errc() || ptr != text_.data() + end || !std::isfinite(v)) error_at("malformed number", start);
    pos_ = end;
    return v;
  }

  int integer() {
    const std::size_t at = pos_;
    const double v = number();
    if (v != std::floor(v) || v < 1 || v > 16) error_at("expected a small positive integer", at);
    return static_cast<int>(v);
  }

  // Raw text up to the next top-level character in `stops`, parsed as an expression.
  Expr expression(std::string_view stops, const std::vector<std::string>& vars) {
    skip_ws();
    const std::size_t start = pos_;
    int depth = 0;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '(') ++depth;
      if (c == ')') {
        if (depth == 0) break;
        --depth;
      }
      if (depth == 0 && stops.find(c) != std::string_view::npos) break;
      if (c == '#') break;
      ++pos_;
    }
    const std::string_view raw = text_.substr(start, pos_ - start);
    if (raw.find_first_not_of(" \t\r\n") == std::string_view::npos) error_at("expected an expression", start);
    try {
      return simplify(parse_expr(raw, vars));
    } catch (const ParseError& e) {
      error_at(e.message(), start + e.position().offset);
    } catch (const UnboundVariableError& e) {
      error_at("unknown identifier '" + e.name() + "'", start + e.position().offset);
    } catch (const InvalidArgument& e) {
      error_at(e.what(), start);
    }
  }

  std::vector<Expr> expression_list(std::string_view stops, const std::vector<std::string>& vars,
                                    std::size_t count, const std::string& what) {
    const std::size_t at = pos_;
    std::vector<Expr> out{expression(std::string(stops) + ",", vars)};
    while (accept(',')) out.push_back(expression(std::string(stops) + ",", vars));
    if (out.size() != count)
      error_at(what + " needs " + std::to_string(count) + " components, found " + std::to_string(out.size()), at);
    return out;
  }

  double constant(std::string_view stops) {
    skip_ws();
    const std::size_t at = pos_;
    static const std::vector<std::string> kConstants{"pi"};
    const Expr e = simplify(substitute(expression(stops, kConstants), {{"pi", Expr(std::numbers::pi)}}));
    if (!e.is_constant()) error_at("expected a numeric constant", at);
    return e.value();
  }

  std::vector<std::string> name_list() {
    std::vector<std::string> out;
    do {
      const std::size_t at = pos_;
      skip_ws();
      std::string n = identifier();
      if (n == kTimeVar) error_at("'t' is reserved for time", at);
      if (std::find(out.begin(), out.end(), n) != out.end()) error_at("duplicate name '" + n + "'", at);
      out.push_back(std::move(n));
    } while (accept(','));
    return out;
  }

  std::vector<Interval> range_list() {
    std::vector<Interval> out;
    do {
      skip_ws();
      const std::size_t at = pos_;
      const double lo = number();
      skip_ws();
      if (text_.substr(pos_, 2) != "..") error("expected '..' in range");
      pos_ += 2;
      const double hi = number();
      if (!(lo < hi)) error_at("range needs lower < upper", at);
      out.push_back({lo, hi});
    } while (accept(','));
    return out;
  }

  // ---- blocks

  void parse_header_block(bool chart) {
    skip_ws();
    const std::size_t block_at = pos_;
    expect('{');
    int dim = -1;
    std::vector<std::string> names;
    std::vector<Interval> box;
    const std::string count_kw = chart ? "dim" : "fibre";
    if (!accept('}')) {
      for (;;) {
        skip_ws();
        const std::size_t at = pos_;
        const std::string kw = identifier();
        if (kw == count_kw) {
          dim = integer();
        } else if (kw == "names") {
          names = name_list();
        } else if (kw == "box") {
          box = range_list();
        } else {
          error_at("unknown " + std::string(chart ? "chart" : "bundle") + " entry '" + kw + "'", at);
        }
        if (end_statement()) break;
      }
    }
    const std::string what = chart ? "chart" : "bundle";
    if (dim < 0) error_at(what + " block needs '" + count_kw + "'", block_at);
    if (static_cast<int>(names.size()) != dim)
      error_at(what + " declares " + std::to_string(dim) + " coordinates but names " + std::to_string(names.size()),
               block_at);
    if (static_cast<int>(box.size()) != dim) error_at(what + " box needs one range per coordinate", block_at);
    if (chart) {
      chart_names_ = std::move(names);
      chart_box_ = std::move(box);
    } else {
      for (const auto& n : names)
        if (std::find(chart_names_.begin(), chart_names_.end(), n) != chart_names_.end())
          error_at("fibre coordinate '" + n + "' clashes with a base coordinate", block_at);
      fibre_names_ = std::move(names);
      fibre_box_ = std::move(box);
    }
  }

  void parse_chart() { parse_header_block(true); }
  void parse_bundle() { parse_header_block(false); }

  void parse_foliation() {
    skip_ws();
    const std::size_t block_at = pos_;
    expect('{');
    if (!accept('}')) {
      for (;;) {
        skip_ws();
        const std::size_t at = pos_;
        const std::string kw = identifier();
        if (kw != "gen") error_at("expected 'gen', found '" + kw + "'", at);
        skip_ws();
        const std::size_t name_at = pos_;
        std::string name = identifier();
        if (std::find(generator_names_.begin(), generator_names_.end(), name) != generator_names_.end())
          error_at("duplicate generator '" + name + "'", name_at);
        expect('=');
        BaseField X{expression_list(";}", chart_names_, chart_names_.size(), "generator '" + name + "'")};
        generator_names_.push_back(std::move(name));
        generators_.push_back(std::move(X));
        if (end_statement()) break;
      }
    }
    if (generators_.empty()) error_at("foliation needs at least one generator", block_at);
  }

  std::vector<ProjField> parse_connection() {
    skip_ws();
    const std::size_t block_at = pos_;
    expect('{');
    std::vector<std::optional<ProjField>> lifts(generators_.size());
    auto total = chart_names_;
    total.insert(total.end(), fibre_names_.begin(), fibre_names_.end());
    if (!accept('}')) {
      for (;;) {
        skip_ws();
        const std::size_t at = pos_;
        const std::string kw = identifier();
        if (kw != "lift") error_at("expected 'lift', found '" + kw + "'", at);
        skip_ws();
        const std::size_t name_at = pos_;
        const std::string name = identifier();
        const int g = generator_index(name);
        if (g < 0) error_at("unknown generator '" + name + "'", name_at);
        if (lifts[g]) error_at("generator '" + name + "' is lifted twice", name_at);
        expect('=');
        ProjField X;
        X.a = expression_list("|;}", chart_names_, chart_names_.size(), "lift of '" + name + "'");
        expect('|');
        X.b = expression_list(";}", total, fibre_names_.size(), "fibre part of the lift of '" + name + "'");
        lifts[g] = std::move(X);
        if (end_statement()) break;
      }
    }
    std::vector<ProjField> out;
    for (std::size_t g = 0; g < lifts.size(); ++g) {
      if (!lifts[g]) error_at("generator '" + generator_names_[g] + "' has no lift", block_at);
      out.push_back(std::move(*lifts[g]));
    }
    return out;
  }

  SectionDecl parse_section(const std::vector<SectionDecl>& seen) {
    skip_ws();
    const std::size_t at = pos_;
    SectionDecl s{identifier(), {}};
    for (const auto& o : seen)
      if (o.name == s.name) error_at("duplicate section '" + s.name + "'", at);
    expect('=');
    s.components = expression_list(";", chart_names_, fibre_names_.size(), "section '" + s.name + "'");
    expect(';');
    return s;
  }

  PathDecl parse_path(const std::vector<PathDecl>& seen) {
    skip_ws();
    const std::size_t at = pos_;
    PathDecl p;
    p.name = identifier();
    const auto known = [&](const std::string& n) {
      return std::any_of(seen.begin(), seen.end(), [&](const PathDecl& d) { return d.name == n; });
    };
    if (known(p.name)) error_at("duplicate path '" + p.name + "'", at);
    if (accept('=')) {
      const auto operand = [&] {
        skip_ws();
        const std::size_t op_at = pos_;
        std::string n = identifier();
        if (!known(n)) error_at("unknown path '" + n + "'", op_at);
        return n;
      };
      skip_ws();
      if (peek_keyword("inverse")) {
        identifier();
        expect('(');
        p.kind = PathDecl::Kind::Inverse;
        p.operands.push_back(operand());
        expect(')');
      } else {
        p.kind = PathDecl::Kind::Compose;
        p.operands.push_back(operand());
        while (accept('*')) p.operands.push_back(operand());
        if (p.operands.size() < 2) error("expected '*' in a path product");
      }
      expect(';');
      return p;
    }

    skip_ws();
    const std::size_t block_at = pos_;
    expect('{');
    const std::size_t r = generators_.size();
    p.coeffs.assign(r, Expr(0.0));
    p.exposure.assign(r, std::nullopt);
    std::vector<bool> has_coeff(r, false);
    bool has_start = false;
    const auto vars = with_time(chart_names_);
    if (!accept('}')) {
      for (;;) {
        skip_ws();
        const std::size_t kw_at = pos_;
        const std::string kw = identifier();
        if (kw == "start") {
          std::vector<double> v{constant(",;}")};
          while (accept(',')) v.push_back(constant(",;}"));
          if (v.size() != chart_names_.size()) error_at("start needs one value per base coordinate", kw_at);
          p.start = Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
          if (!Box(chart_box_).contains(p.start)) error_at("start lies outside the chart box", kw_at);
          has_start = true;
        } else if (kw == "duration") {
          p.duration = constant(";}");
          if (!(p.duration > 0)) error_at("duration must be positive", kw_at);
        } else if (kw == "margin") {
          p.margin = constant(";}");
          if (p.margin < 0) error_at("margin must be >= 0", kw_at);
        } else if (kw == "coeff" || kw == "exposure") {
          skip_ws();
          const std::size_t name_at = pos_;
          const std::string g_name = identifier();
          const int g = generator_index(g_name);
          if (g < 0) error_at("unknown generator '" + g_name + "'", name_at);
          expect('=');
          if (kw == "coeff") {
            if (has_coeff[g]) error_at("coefficient of '" + g_name + "' given twice", name_at);
            p.coeffs[g] = expression(";}", vars);
            has_coeff[g] = true;
          } else {
            p.exposure[g] = constant(";}");
          }
        } else {
          error_at("unknown path entry '" + kw + "'", kw_at);
        }
        if (end_statement()) break;
      }
    }
    if (!has_start) error_at("path '" + p.name + "' needs a start point", block_at);
    if (p.margin > 0 && !(p.margin < p.duration / 4)) error_at("margin must be below duration/4", block_at);
    for (std::size_t g = 0; g < r; ++g) {
      if (!p.exposure[g]) continue;
      if (!has_coeff[g]) p.coeffs[g] = Expr(1.0);
      for (const auto& v : free_variables(p.coeffs[g]))
        if (v != kTimeVar)
          error_at("exposure of '" + generator_names_[g] + "' needs a coefficient in t only", block_at);
    }
    return p;
  }

  int generator_index(const std::string& name) const {
    const auto it = std::find(generator_names_.begin(), generator_names_.end(), name);
    return it == generator_names_.end() ? -1 : static_cast<int>(it - generator_names_.begin());
  }

  static void validate(Scene& s, const SceneOptions& opts) {
    const auto samples = sample_points(s.chart());
    std::vector<std::string> problems;
    const auto inv = involutivity_check(s.foliation(), samples, opts.tol);
    if (!inv.passed)
      problems.push_back("involutivity fails at " + std::to_string(inv.failures.size()) + " sample(s), worst residual " +
                         format_number(inv.worst));
    const auto ri = validate_right_inverse(s.connection, samples, opts.tol);
    if (!ri.passed) problems.push_back("lifts do not project onto their generators, worst residual " +
                                       format_number(ri.worst));
    const auto br = validate_bracket_preserving(s.connection, samples, opts.tol);
    if (!br.passed)
      problems.push_back("connection is not bracket preserving at " + std::to_string(br.failures.size()) +
                         " sample(s), worst residual " + format_number(br.worst));
    if (opts.strict && !problems.empty()) {
      std::string msg = "scene validation failed";
      for (const auto& p : problems) msg += "; " + p;
      throw SceneValidationError(msg);
    }
    s.warnings = std::move(problems);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::vector<std::string> chart_names_;
  std::vector<Interval> chart_box_;
  std::vector<std::string> fibre_names_;
  std::vector<Interval> fibre_box_;
  std::vector<std::string> generator_names_;
  std::vector<BaseField> generators_;
};

std::string join_numbers(const Eigen::VectorXd& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_number(v[i]);
  return out;
}

std::string join_exprs(const std::vector<Expr>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + to_string(v[i]);
  return out;
}

std::string join_names(const std::vector<std::string>& v, const char* sep = ", ") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
  return out;
}

std::string join_box(const Box& b) {
  std::string out;
  for (int i = 0; i < b.dim(); ++i) out += (i ? ", " : "") + format_number(b[i].lo) + ".." + format_number(b[i].hi);
  return out;
}

bool same_exprs(const std::vector<Expr>& a, const std::vector<Expr>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(a[i] == b[i])) return false;
  return true;
}

bool same_box(const Box& a, const Box& b) {
  if (a.dim() != b.dim()) return false;
  for (int i = 0; i < a.dim(); ++i)
    if (a[i].lo != b[i].lo || a[i].hi != b[i].hi) return false;
  return true;
}

LeafwisePath build(const Scene& s, std::string_view name, std::map<std::string, LeafwisePath, std::less<>>& memo) {
  if (auto it = memo.find(name); it != memo.end()) return it->second;
  const PathDecl* d = s.find_path(name);
  if (!d) throw InvalidArgument("unknown path '" + std::string(name) + "'");
  const auto operand = [&](const std::string& n) { return build(s, n, memo); };
  LeafwisePath p = [&] {
    switch (d->kind) {
      case PathDecl::Kind::Inverse: return invert(operand(d->operands[0]));
      case PathDecl::Kind::Compose: {
        LeafwisePath acc = operand(d->operands.back());
        for (std::size_t i = d->operands.size() - 1; i-- > 0;) acc = concatenate(operand(d->operands[i]), acc);
        return acc;
      }
      case PathDecl::Kind::Segment: break;
    }
    std::vector<Expr> coeffs = d->coeffs;
    const double margin = d->margin > 0 ? d->margin : d->duration / 10;
    const Expr w = window(d->duration, margin);
    for (std::size_t g = 0; g < coeffs.size(); ++g) {
      if (!d->exposure[g]) continue;
      PathSegment seg;
      seg.duration = d->duration;
      seg.margin = margin;
      seg.coeffs = {simplify(coeffs[g] * w)};
      const double raw = exposure(seg, 0);
      if (std::abs(raw) < 1e-300)
        throw InvalidArgument("path '" + d->name + "': coefficient of '" + s.foliation().generator_names[g] +
                              "' integrates to zero and cannot be rescaled");
      coeffs[g] = simplify(Expr(*d->exposure[g] / raw) * coeffs[g]);
    }
    return make_path(s.foliation(), d->start, d->duration, d->margin, std::move(coeffs));
  }();
  memo.emplace(std::string(name), p);
  return p;
}

}  // namespace

const SectionDecl* Scene::find_section(std::string_view name) const {
  for (const auto& s : sections)
    if (s.name == name) return &s;
  return nullptr;
}

const PathDecl* Scene::find_path(std::string_view name) const {
  for (const auto& p : paths)
    if (p.name == name) return &p;
  return nullptr;
}

Scene parse_scene(std::string_view text, const SceneOptions& opts) { return SceneParser(text).parse(opts); }

std::string print_scene(const Scene& s) {
  std::ostringstream os;
  const Chart& ch = s.chart();
  const Bundle& B = s.bundle();
  const Foliation& F = s.foliation();
  os << "chart {\n  dim " << ch.dim() << ";\n  names " << join_names(ch.names()) << ";\n  box "
     << join_box(ch.domain()) << ";\n}\n\n";
  os << "bundle {\n  fibre " << B.n_fibre() << ";\n  names " << join_names(B.fibre_names()) << ";\n  box "
     << join_box(B.fibre_domain()) << ";\n}\n\n";
  os << "foliation {\n";
  for (int g = 0; g < F.size(); ++g)
    os << "  gen " << F.generator_names[g] << " = " << join_exprs(F.generators[g].a) << ";\n";
  os << "}\n\nconnection {\n";
  for (int g = 0; g < F.size(); ++g) {
    const ProjField& l = s.connection.lifts()[g];
    os << "  lift " << F.generator_names[g] << " = " << join_exprs(l.a) << " | " << join_exprs(l.b) << ";\n";
  }
  os << "}\n";
  if (!s.sections.empty()) os << '\n';
  for (const auto& sec : s.sections) os << "section " << sec.name << " = " << join_exprs(sec.components) << ";\n";
  for (const auto& p : s.paths) {
    os << '\n';
    switch (p.kind) {
      case PathDecl::Kind::Inverse: os << "path " << p.name << " = inverse(" << p.operands[0] << ");\n"; break;
      case PathDecl::Kind::Compose: os << "path " << p.name << " = " << join_names(p.operands, " * ") << ";\n"; break;
      case PathDecl::Kind::Segment:
        os << "path " << p.name << " {\n  start " << join_numbers(p.start) << ";\n  duration "
           << format_number(p.duration) << ";\n";
        if (p.margin > 0) os << "  margin " << format_number(p.margin) << ";\n";
        for (int g = 0; g < F.size(); ++g)
          if (!p.coeffs[g].is_zero()) os << "  coeff " << F.generator_names[g] << " = " << to_string(p.coeffs[g]) << ";\n";
        for (int g = 0; g < F.size(); ++g)
          if (p.exposure[g])
            os << "  exposure " << F.generator_names[g] << " = " << format_number(*p.exposure[g]) << ";\n";
        os << "}\n";
        break;
    }
  }
  return os.str();
}

bool structurally_equal(const Scene& a, const Scene& b) {
  const Chart &ca = a.chart(), &cb = b.chart();
  if (ca.names() != cb.names() || !same_box(ca.domain(), cb.domain())) return false;
  if (a.bundle().fibre_names() != b.bundle().fibre_names() ||
      !same_box(a.bundle().fibre_domain(), b.bundle().fibre_domain()))
    return false;
  if (!same_foliation(a.foliation(), b.foliation())) return false;
  for (int g = 0; g < a.foliation().size(); ++g) {
    const ProjField &la = a.connection.lifts()[g], &lb = b.connection.lifts()[g];
    if (!same_exprs(la.a, lb.a) || !same_exprs(la.b, lb.b)) return false;
  }
  if (a.sections.size() != b.sections.size() || a.paths.size() != b.paths.size()) return false;
  for (std::size_t i = 0; i < a.sections.size(); ++i)
    if (a.sections[i].name != b.sections[i].name || !same_exprs(a.sections[i].components, b.sections[i].components))
      return false;
  for (std::size_t i = 0; i < a.paths.size(); ++i) {
    const PathDecl &p = a.paths[i], &q = b.paths[i];
    if (p.name != q.name || p.kind != q.kind || p.operands != q.operands) return false;
    if (p.kind != PathDecl::Kind::Segment) continue;
    if (p.start != q.start || p.duration != q.duration || p.margin != q.margin || p.exposure != q.exposure ||
        !same_exprs(p.coeffs, q.coeffs))
      return false;
  }
  return true;
}

LeafwisePath build_path(const Scene& s, std::string_view name) {
  std::map<std::string, LeafwisePath, std::less<>> memo;
  return build(s, name, memo);
}

}  // namespace jetholo
