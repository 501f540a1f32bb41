#include "nmar/kernels.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace nmar {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;  // 1/sqrt(2*pi)

double triweight_base(double t) {
  const double s = 1.0 - t * t;
  if (s <= 0.0) return 0.0;
  return (35.0 / 32.0) * s * s * s;
}

double parse_number(const std::string& text) {
  // Accepts plain decimals and simple fractions such as "1/3".
  const auto slash = text.find('/');
  try {
    if (slash == std::string::npos) {
      std::size_t used = 0;
      const double v = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return v;
    }
    std::size_t used = 0;
    const double num = std::stod(text.substr(0, slash), &used);
    const double den = std::stod(text.substr(slash + 1), &used);
    if (den == 0.0) throw std::invalid_argument(text);
    return num / den;
  } catch (const std::exception&) {
    throw ConfigError("cannot parse numeric value '" + text + "'");
  }
}

}  // namespace

double kernel_value(KernelFamily family, double t) {
  switch (family) {
    case KernelFamily::gaussian:
      return kInvSqrt2Pi * std::exp(-0.5 * t * t);
    case KernelFamily::triweight:
      return triweight_base(t);
    case KernelFamily::triweight4:
      // Fourth-order version: (a + b t^2) * triweight(t) with a, b chosen so
      // the zeroth moment stays 1 and the second moment vanishes.
      return (27.0 / 16.0 - (99.0 / 16.0) * t * t) * triweight_base(t);
  }
  throw ConfigError("unknown kernel family");
}

int kernel_order(KernelFamily family) {
  return family == KernelFamily::triweight4 ? 4 : 2;
}

double KernelSpec::bandwidth(int n_full) const {
  if (n_full <= 0) throw ConfigError("bandwidth rule needs a positive sample size");
  return scale * std::pow(static_cast<double>(n_full), -rate);
}

void KernelSpec::validate() const {
  if (!(scale > 0.0)) throw ConfigError("kernel scale must be positive");
  if (!(rate > 0.0) || !(rate < 1.0)) throw ConfigError("kernel rate must lie in (0,1)");
}

KernelSpec KernelSpec::parse(const std::string& text) {
  KernelSpec spec;
  std::stringstream ss(text);
  std::string part;
  bool first = true;
  while (std::getline(ss, part, ':')) {
    if (first) {
      if (part == "gaussian") {
        spec.family = KernelFamily::gaussian;
      } else if (part == "triweight") {
        spec.family = KernelFamily::triweight;
      } else if (part == "triweight4") {
        spec.family = KernelFamily::triweight4;
      } else {
        throw ConfigError("unknown kernel family '" + part + "'");
      }
      first = false;
      continue;
    }
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw ConfigError("malformed kernel option '" + part + "'");
    const std::string key = part.substr(0, eq);
    const std::string val = part.substr(eq + 1);
    if (key == "c") {
      spec.scale = parse_number(val);
    } else if (key == "gamma") {
      spec.rate = parse_number(val);
    } else {
      throw ConfigError("unknown kernel option '" + key + "'");
    }
  }
  if (first) throw ConfigError("empty kernel specification");
  spec.validate();
  return spec;
}

std::string KernelSpec::to_string() const {
  std::ostringstream out;
  switch (family) {
    case KernelFamily::gaussian: out << "gaussian"; break;
    case KernelFamily::triweight: out << "triweight"; break;
    case KernelFamily::triweight4: out << "triweight4"; break;
  }
  out << ":c=" << scale << ":gamma=" << rate;
  return out.str();
}

double product_weight(KernelFamily family, const VectorXd& point, const VectorXd& query,
                      double bandwidth) {
  if (point.size() != query.size()) throw DataError("kernel point/query dimension mismatch");
  if (!(bandwidth > 0.0)) throw ConfigError("bandwidth must be positive");
  double w = 1.0;
  for (int k = 0; k < point.size(); ++k) {
    w *= kernel_value(family, (point[k] - query[k]) / bandwidth);
    if (w == 0.0) return 0.0;
  }
  return w;
}

double nw_regress(const std::vector<double>& targets, const std::vector<VectorXd>& points,
                  const VectorXd& query, const KernelSpec& spec, double bandwidth) {
  if (targets.size() != points.size()) throw DataError("targets and points differ in length");
  if (points.empty()) throw EmptyNeighborhood("no points to smooth over");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t j = 0; j < points.size(); ++j) {
    const double w = product_weight(spec.family, points[j], query, bandwidth);
    num += w * targets[j];
    den += w;
  }
  // Fourth-order families can yield a negative denominator in sparse regions;
  // only exact zero mass means the query saw no points at all.
  if (den == 0.0) throw EmptyNeighborhood("query point has no kernel mass");
  return num / den;
}

}  // namespace nmar
