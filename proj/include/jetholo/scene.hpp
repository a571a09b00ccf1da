#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "jetholo/connection.hpp"
#include "jetholo/errors.hpp"
#include "jetholo/flow.hpp"

namespace jetholo {

/// A named section: one expression per fibre coordinate over the base coordinates.
struct SectionDecl {
  std::string name;
  std::vector<Expr> components;
};

/// A path as declared in a scene. Segment paths keep their raw coefficients so that the scene
/// can be printed back; build_path() turns a declaration into a LeafwisePath.
struct PathDecl {
  enum class Kind { Segment, Compose, Inverse };

  std::string name;
  Kind kind = Kind::Segment;
  Eigen::VectorXd start;
  double duration = 1.0;
  /// 0 selects the default margin d/10.
  double margin = 0.0;
  /// One raw coefficient per generator (zero when not given).
  std::vector<Expr> coeffs;
  /// Requested windowed exposure per generator; the coefficient is rescaled to hit it.
  std::vector<std::optional<double>> exposure;
  /// Compose: written left to right as in "a * b", b runs first. Inverse: one operand.
  std::vector<std::string> operands;
};

struct Scene {
  Connection connection;
  std::vector<SectionDecl> sections;
  std::vector<PathDecl> paths;
  /// Validator findings that did not stop parsing.
  std::vector<std::string> warnings;

  const Chart& chart() const { return connection.foliation().chart; }
  const Bundle& bundle() const { return connection.bundle(); }
  const Foliation& foliation() const { return connection.foliation(); }
  const SectionDecl* find_section(std::string_view name) const;
  const PathDecl* find_path(std::string_view name) const;
};

/// Geometry or connection validation failed while parsing in strict mode.
class SceneValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SceneOptions {
  /// Validator failures become SceneValidationError instead of warnings.
  bool strict = false;
  /// Run the involutivity, right-inverse and bracket validators.
  bool validate = true;
  double tol = 1e-8;
};

/// Parses the scene grammar (docs/scene_grammar.md). Syntax errors and unresolved names throw
/// ParseError with the position in `text`.
Scene parse_scene(std::string_view text, const SceneOptions& opts = {});

/// Canonical text of a scene; parse_scene(print_scene(s)) is structurally equal to s.
std::string print_scene(const Scene& s);

/// Same declarations, expressions, boxes and numbers.
bool structurally_equal(const Scene& a, const Scene& b);

/// Builds a declared path (and the paths it refers to). Throws InvalidArgument for unknown
/// names and FlowError when a trajectory leaves the chart.
LeafwisePath build_path(const Scene& s, std::string_view name);

}  // namespace jetholo
