#pragma once

#include <cmath>
#include <concepts>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace hcp {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPosInf = std::numeric_limits<double>::infinity();

// Any type exposing an infection-scale sequence alpha_1, alpha_2, ... in both
// linear and log form. The log form is the one the bounds machinery consumes;
// values with 2^n or N^n exponents are never formed in linear arithmetic.
template <class A>
concept AlphaLike = requires(const A& a, int k) {
  { a.alpha(k) } -> std::convertible_to<double>;
  { a.log_alpha(k) } -> std::convertible_to<double>;
  { a.support_end() } -> std::convertible_to<int>;  // last nonzero index, -1 = infinite
};

// The rate family alpha_k attached to a hierarchical model. Four closed
// forms are supported:
//   explicit:  a finite list, zero beyond its end
//   geometric: alpha_k = q^k, 0 < q < 1
//   double_exp: alpha_k = exp(-theta^k), theta > 1
//   effective_dim: alpha_k = N^(-2k/d), d > 0 (geometric with q = N^(-2/d))
class AlphaSeq {
 public:
  enum class Family { explicit_list, geometric, double_exp, effective_dim };

  static AlphaSeq explicit_list(std::vector<double> values) {
    for (double v : values)
      if (!(v >= 0.0)) throw std::invalid_argument("AlphaSeq: explicit values must be >= 0");
    AlphaSeq a;
    a.family_ = Family::explicit_list;
    a.values_ = std::move(values);
    a.suffix_sums_.assign(a.values_.size() + 1, 0.0);
    for (int k = static_cast<int>(a.values_.size()) - 1; k >= 0; --k)
      a.suffix_sums_[k] = a.suffix_sums_[k + 1] + a.values_[k];
    return a;
  }

  static AlphaSeq geometric(double q) {
    if (!(q > 0.0)) throw std::invalid_argument("AlphaSeq: geometric ratio must be > 0");
    AlphaSeq a;
    a.family_ = Family::geometric;
    a.q_ = q;
    return a;
  }

  static AlphaSeq double_exp(double theta) {
    if (!(theta > 1.0)) throw std::invalid_argument("AlphaSeq: double_exp needs theta > 1");
    AlphaSeq a;
    a.family_ = Family::double_exp;
    a.theta_ = theta;
    return a;
  }

  static AlphaSeq effective_dim(double d, int N) {
    if (!(d > 0.0)) throw std::invalid_argument("AlphaSeq: effective_dim needs d > 0");
    if (N < 2) throw std::invalid_argument("AlphaSeq: effective_dim needs N >= 2");
    AlphaSeq a;
    a.family_ = Family::effective_dim;
    a.d_ = d;
    a.N_ = N;
    a.q_ = std::pow(static_cast<double>(N), -2.0 / d);
    return a;
  }

  Family family() const { return family_; }

  double alpha(int k) const {
    check_k(k);
    switch (family_) {
      case Family::explicit_list:
        return k <= static_cast<int>(values_.size()) ? values_[k - 1] : 0.0;
      case Family::geometric:
      case Family::effective_dim:
        return std::exp(static_cast<double>(k) * std::log(q_));
      case Family::double_exp:
        return std::exp(-std::pow(theta_, static_cast<double>(k)));
    }
    return 0.0;
  }

  double log_alpha(int k) const {
    check_k(k);
    switch (family_) {
      case Family::explicit_list: {
        double v = alpha(k);
        return v > 0.0 ? std::log(v) : kNegInf;
      }
      case Family::geometric:
      case Family::effective_dim:
        return static_cast<double>(k) * std::log(q_);
      case Family::double_exp:
        return -std::pow(theta_, static_cast<double>(k));
    }
    return kNegInf;
  }

  // Last index k with alpha_k possibly nonzero; -1 means infinite support.
  int support_end() const {
    if (family_ != Family::explicit_list) return -1;
    for (int k = static_cast<int>(values_.size()); k >= 1; --k)
      if (values_[k - 1] > 0.0) return k;
    return 0;  // identically zero
  }

  bool summable() const {
    switch (family_) {
      case Family::explicit_list: return true;
      case Family::geometric:
      case Family::effective_dim: return q_ < 1.0;
      case Family::double_exp: return theta_ > 1.0;
    }
    return false;
  }

  // sum_{k>=1} alpha_k
  double sum() const {
    if (!summable()) throw std::domain_error("AlphaSeq: sum diverges");
    switch (family_) {
      case Family::explicit_list: return suffix_sums_.empty() ? 0.0 : suffix_sums_[0];
      case Family::geometric:
      case Family::effective_dim: return q_ / (1.0 - q_);
      case Family::double_exp: return double_exp_tail(1);
    }
    return 0.0;
  }

  // beta_k = sum_{n>=k} alpha_n. Exact closed form for the geometric
  // families; for double_exp a truncated sum whose next term is below
  // 1e-18 of the running total (terms decay doubly exponentially, so the
  // discarded remainder is below a geometric majorant of the same size).
  double beta_tail(int k) const {
    check_k(k);
    if (!summable()) throw std::domain_error("AlphaSeq: beta_tail diverges");
    switch (family_) {
      case Family::explicit_list:
        return k <= static_cast<int>(values_.size()) ? suffix_sums_[k - 1] : 0.0;
      case Family::geometric:
      case Family::effective_dim:
        return std::exp(static_cast<double>(k) * std::log(q_)) / (1.0 - q_);
      case Family::double_exp:
        return double_exp_tail(k);
    }
    return 0.0;
  }

  double log_beta_tail(int k) const {
    check_k(k);
    if (!summable()) throw std::domain_error("AlphaSeq: beta_tail diverges");
    switch (family_) {
      case Family::explicit_list: {
        double b = beta_tail(k);
        return b > 0.0 ? std::log(b) : kNegInf;
      }
      case Family::geometric:
      case Family::effective_dim:
        return static_cast<double>(k) * std::log(q_) - std::log1p(-q_);
      case Family::double_exp: {
        // beta_k = exp(-theta^k) * (1 + sum_{m>=1} exp(-theta^k (theta^m - 1)))
        double tk = std::pow(theta_, static_cast<double>(k));
        if (std::isinf(tk)) return kNegInf;
        double corr = 0.0;
        double tm = theta_;
        for (int m = 1; m < 400; ++m) {
          double term = std::exp(-tk * (tm - 1.0));
          corr += term;
          if (term < 1e-18 * (1.0 + corr)) break;
          tm *= theta_;
        }
        return -tk + std::log1p(corr);
      }
    }
    return kNegInf;
  }

  nlohmann::json to_json() const {
    switch (family_) {
      case Family::explicit_list: return {{"family", "explicit"}, {"values", values_}};
      case Family::geometric: return {{"family", "geometric"}, {"q", q_}};
      case Family::double_exp: return {{"family", "double_exp"}, {"theta", theta_}};
      case Family::effective_dim: return {{"family", "effective_dim"}, {"d", d_}, {"N", N_}};
    }
    return {};
  }

  static AlphaSeq from_json(const nlohmann::json& j) {
    const std::string fam = j.at("family").get<std::string>();
    if (fam == "explicit") return explicit_list(j.at("values").get<std::vector<double>>());
    if (fam == "geometric") return geometric(j.at("q").get<double>());
    if (fam == "double_exp") return double_exp(j.at("theta").get<double>());
    if (fam == "effective_dim")
      return effective_dim(j.at("d").get<double>(), j.value("N", 2));
    throw std::invalid_argument("AlphaSeq: unknown family '" + fam + "'");
  }

  // Inline CLI grammar: geometric:q | double_exp:theta | effective_dim:d |
  // explicit:a1,a2,... ("N" for effective_dim is taken from the model).
  static AlphaSeq parse(const std::string& text, int N = 2) {
    auto colon = text.find(':');
    if (colon == std::string::npos)
      throw std::invalid_argument("AlphaSeq: expected family:params, got '" + text + "'");
    const std::string fam = text.substr(0, colon);
    const std::string rest = text.substr(colon + 1);
    if (fam == "geometric") return geometric(std::stod(rest));
    if (fam == "double_exp") return double_exp(std::stod(rest));
    if (fam == "effective_dim") return effective_dim(std::stod(rest), N);
    if (fam == "explicit") {
      std::vector<double> vals;
      std::stringstream ss(rest);
      std::string tok;
      while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
      return explicit_list(std::move(vals));
    }
    throw std::invalid_argument("AlphaSeq: unknown family '" + fam + "'");
  }

  std::string label() const {
    std::ostringstream os;
    switch (family_) {
      case Family::explicit_list:
        os << "explicit:";
        for (std::size_t i = 0; i < values_.size(); ++i) os << (i ? "," : "") << values_[i];
        break;
      case Family::geometric: os << "geometric:" << q_; break;
      case Family::double_exp: os << "double_exp:" << theta_; break;
      case Family::effective_dim: os << "effective_dim:" << d_; break;
    }
    return os.str();
  }

 private:
  AlphaSeq() = default;

  static void check_k(int k) {
    if (k < 1) throw std::invalid_argument("AlphaSeq: index k must be >= 1");
  }

  double double_exp_tail(int k) const {
    double sum = 0.0;
    double tk = std::pow(theta_, static_cast<double>(k));
    for (int n = 0; n < 400; ++n) {
      double term = std::exp(-tk);
      sum += term;
      if (term < 1e-18 * sum) break;
      tk *= theta_;
    }
    return sum;
  }

  Family family_ = Family::geometric;
  std::vector<double> values_;
  std::vector<double> suffix_sums_;
  double q_ = 0.5;
  double theta_ = 2.0;
  double d_ = 2.0;
  int N_ = 2;
};

static_assert(AlphaLike<AlphaSeq>);

// ---------------------------------------------------------------------------
// Finite-depth diagnostics for the asymptotic rate-decay conditions that
// separate the zero and positive critical-recovery-rate regimes. The verdict
// is heuristic by construction: a finite prefix of an asymptotic condition is
// evidence, not proof, and the report says so.
// ---------------------------------------------------------------------------

enum class ConditionVerdict { extinction_indicated, survival_indicated, inconclusive };

inline const char* to_string(ConditionVerdict v) {
  switch (v) {
    case ConditionVerdict::extinction_indicated: return "extinction-condition-indicated";
    case ConditionVerdict::survival_indicated: return "survival-condition-indicated";
    case ConditionVerdict::inconclusive: return "inconclusive";
  }
  return "?";
}

struct ConditionDiagnostics {
  int N = 2;
  int depth = 0;
  // beta_terms[k-1] = N^-k log(beta_k); -inf entries are genuine.
  std::vector<double> beta_terms;
  // alpha_partial[k-1] = sum_{m=1}^{k} N^-m log(alpha_m)
  std::vector<double> alpha_partial;
  double running_min_beta_term = kPosInf;
  ConditionVerdict verdict = ConditionVerdict::inconclusive;
  bool heuristic = true;

  nlohmann::json to_json() const {
    return {{"schema", "hcp/1"},
            {"N", N},
            {"depth", depth},
            {"beta_terms", beta_terms},
            {"alpha_partial_sums", alpha_partial},
            {"running_min_beta_term", running_min_beta_term},
            {"verdict", to_string(verdict)},
            {"heuristic", heuristic}};
  }
};

inline ConditionDiagnostics condition_diagnostics(const AlphaSeq& alpha, int N, int depth) {
  if (depth < 2) throw std::invalid_argument("condition_diagnostics: depth must be >= 2");
  if (N < 2) throw std::invalid_argument("condition_diagnostics: N must be >= 2");
  ConditionDiagnostics rep;
  rep.N = N;
  rep.depth = depth;
  const double logN = std::log(static_cast<double>(N));
  double partial = 0.0;
  bool saw_neg_inf = false;
  for (int k = 1; k <= depth; ++k) {
    double scale = std::exp(-static_cast<double>(k) * logN);
    double lb = alpha.summable() ? alpha.log_beta_tail(k) : kPosInf;
    double term = scale * lb;
    if (lb == kNegInf) {
      term = kNegInf;
      saw_neg_inf = true;
    }
    rep.beta_terms.push_back(term);
    rep.running_min_beta_term = std::min(rep.running_min_beta_term, term);
    double la = alpha.log_alpha(k);
    partial += scale * la;  // -inf propagates
    rep.alpha_partial.push_back(partial);
  }

  if (saw_neg_inf) {
    rep.verdict = ConditionVerdict::extinction_indicated;
    return rep;
  }

  // Extinction trend: the last few terms below -1 and shrinking by a factor
  // >= 1.2 per level, so the sequence is headed to -infinity.
  bool ext = depth >= 4;
  for (int k = depth - 2; k <= depth && ext; ++k) {
    double cur = rep.beta_terms[k - 1], prev = rep.beta_terms[k - 2];
    if (!(cur < -1.0) || !(std::fabs(cur) >= 1.2 * std::fabs(prev))) ext = false;
  }

  // Survival trend: increments N^-k |log alpha_k| decaying geometrically
  // (ratio <= 0.95 over the last few levels), so the partial sums converge.
  bool surv = depth >= 4;
  for (int k = depth - 2; k <= depth && surv; ++k) {
    double cur = std::exp(-k * logN) * std::fabs(alpha.log_alpha(k));
    double prev = std::exp(-(k - 1) * logN) * std::fabs(alpha.log_alpha(k - 1));
    if (!(prev > 0.0) || !(cur / prev <= 0.95)) surv = false;
  }

  if (ext && !surv)
    rep.verdict = ConditionVerdict::extinction_indicated;
  else if (surv && !ext)
    rep.verdict = ConditionVerdict::survival_indicated;
  else
    rep.verdict = ConditionVerdict::inconclusive;
  return rep;
}

}  // namespace hcp
