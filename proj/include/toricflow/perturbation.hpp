#pragma once

// Analytic initial corrections psi_0 (value, gradient, Hessian).
//
//   bump a p            a * prod_k (1 - x_k^2)^p            (integer p >= 2)
//   cosine a k1 [k2] [phase]
//                       a * cos(pi <k, x> + phase)
//   random a count      `count` cosine modes with wave numbers in {1, 2, 3},
//                       amplitudes uniform in [-a, a] / count, phases uniform;
//                       drawn from mt19937_64 seeded by the run seed.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "toricflow/errors.hpp"

namespace toricflow {

struct PerturbationTerm {
  enum class Kind { kBump, kCosine };
  Kind kind = Kind::kBump;
  double amplitude = 0;
  int power = 2;
  std::vector<double> wave = {};
  double phase = 0;
};

class Perturbation {
 public:
  Perturbation() = default;
  explicit Perturbation(std::vector<PerturbationTerm> terms) : terms_(std::move(terms)) {}

  const std::vector<PerturbationTerm>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }
  void add(PerturbationTerm t) { terms_.push_back(std::move(t)); }

  /// Multiplies every amplitude by s.
  Perturbation scaled(double s) const {
    Perturbation p = *this;
    for (auto& t : p.terms_) t.amplitude *= s;
    return p;
  }

  template <int N>
  double value(const Eigen::Matrix<double, N, 1>& x) const {
    double v = 0;
    for (const auto& t : terms_) {
      if (t.kind == PerturbationTerm::Kind::kBump) {
        double b = t.amplitude;
        for (int a = 0; a < N; ++a) b *= ipow(1 - x[a] * x[a], t.power);
        v += b;
      } else {
        v += t.amplitude * std::cos(arg<N>(t, x));
      }
    }
    return v;
  }

  template <int N>
  Eigen::Matrix<double, N, 1> gradient(const Eigen::Matrix<double, N, 1>& x) const {
    Eigen::Matrix<double, N, 1> g = Eigen::Matrix<double, N, 1>::Zero();
    for (const auto& t : terms_) {
      if (t.kind == PerturbationTerm::Kind::kBump) {
        for (int a = 0; a < N; ++a) {
          double d = t.amplitude * t.power * ipow(1 - x[a] * x[a], t.power - 1) * (-2 * x[a]);
          for (int b = 0; b < N; ++b)
            if (b != a) d *= ipow(1 - x[b] * x[b], t.power);
          g[a] += d;
        }
      } else {
        double s = -t.amplitude * std::numbers::pi * std::sin(arg<N>(t, x));
        for (int a = 0; a < N; ++a) g[a] += s * wave(t, a);
      }
    }
    return g;
  }

  template <int N>
  Eigen::Matrix<double, N, N> hessian(const Eigen::Matrix<double, N, 1>& x) const {
    Eigen::Matrix<double, N, N> H = Eigen::Matrix<double, N, N>::Zero();
    for (const auto& t : terms_) {
      if (t.kind == PerturbationTerm::Kind::kBump) {
        const int p = t.power;
        Eigen::Matrix<double, N, 1> s, d1, d2;
        for (int a = 0; a < N; ++a) {
          s[a] = ipow(1 - x[a] * x[a], p);
          d1[a] = p * ipow(1 - x[a] * x[a], p - 1) * (-2 * x[a]);
          d2[a] = p * (p - 1) * ipow(1 - x[a] * x[a], p - 2) * 4 * x[a] * x[a] -
                  2 * p * ipow(1 - x[a] * x[a], p - 1);
        }
        for (int a = 0; a < N; ++a)
          for (int b = 0; b < N; ++b) {
            double v = t.amplitude * (a == b ? d2[a] : d1[a] * d1[b]);
            for (int c = 0; c < N; ++c)
              if (c != a && c != b) v *= s[c];
            H(a, b) += v;
          }
      } else {
        double c = -t.amplitude * std::numbers::pi * std::numbers::pi * std::cos(arg<N>(t, x));
        for (int a = 0; a < N; ++a)
          for (int b = 0; b < N; ++b) H(a, b) += c * wave(t, a) * wave(t, b);
      }
    }
    return H;
  }

 private:
  static double ipow(double b, int e) {
    double r = 1;
    for (int i = 0; i < e; ++i) r *= b;
    return r;
  }
  static double wave(const PerturbationTerm& t, int a) {
    return a < int(t.wave.size()) ? t.wave[a] : 0.0;
  }
  template <int N>
  static double arg(const PerturbationTerm& t, const Eigen::Matrix<double, N, 1>& x) {
    double s = t.phase;
    for (int a = 0; a < N; ++a) s += std::numbers::pi * wave(t, a) * x[a];
    return s;
  }

  std::vector<PerturbationTerm> terms_;
};

/// Parses one perturbation line. Random terms expand into cosines using
/// `rng`, so the result depends on the seed and on line order.
inline std::vector<PerturbationTerm> parse_perturbation_line(const std::string& line, int dimension,
                                                             std::mt19937_64& rng) {
  std::istringstream in(line);
  std::string kind;
  in >> kind;
  std::vector<double> args;
  for (std::string tok; in >> tok;) {
    try {
      std::size_t pos = 0;
      args.push_back(std::stod(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError("perturbation: expected a number, got '" + tok + "'");
    }
  }
  std::vector<PerturbationTerm> out;
  if (kind == "bump") {
    if (args.size() != 2) throw ConfigError("perturbation: 'bump' takes amplitude and power");
    int p = int(args[1]);
    if (double(p) != args[1] || p < 2) throw ConfigError("perturbation: bump power must be an integer >= 2");
    out.push_back({PerturbationTerm::Kind::kBump, args[0], p, {}, 0});
  } else if (kind == "cosine") {
    if (args.size() < 1 + std::size_t(dimension) || args.size() > 2 + std::size_t(dimension))
      throw ConfigError("perturbation: 'cosine' takes amplitude, " + std::to_string(dimension) +
                        " wave numbers and an optional phase");
    PerturbationTerm t{PerturbationTerm::Kind::kCosine, args[0], 2, {}, 0};
    for (int a = 0; a < dimension; ++a) t.wave.push_back(args[1 + a]);
    if (args.size() == 2 + std::size_t(dimension)) t.phase = args.back();
    out.push_back(t);
  } else if (kind == "random") {
    if (args.size() != 2 || args[1] < 1 || double(int(args[1])) != args[1])
      throw ConfigError("perturbation: 'random' takes amplitude and a positive integer count");
    int count = int(args[1]);
    std::uniform_int_distribution<int> kdist(1, 3);
    std::uniform_real_distribution<double> adist(-1.0, 1.0), pdist(0.0, 2 * std::numbers::pi);
    for (int c = 0; c < count; ++c) {
      PerturbationTerm t{PerturbationTerm::Kind::kCosine, 0, 2, {}, 0};
      for (int a = 0; a < dimension; ++a) t.wave.push_back(double(kdist(rng)));
      t.amplitude = args[0] * adist(rng) / count;
      t.phase = pdist(rng);
      out.push_back(t);
    }
  } else {
    throw ConfigError("perturbation: unknown term '" + kind + "'");
  }
  return out;
}

}  // namespace toricflow
