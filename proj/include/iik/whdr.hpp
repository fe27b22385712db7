#pragma once

#include <map>
#include <string>
#include <vector>

#include "iik/inference.hpp"
#include "iik/rng.hpp"
#include "iik/tensor.hpp"
#include "json.hpp"

// WHDR evaluation: weighted human disagreement ratio over point-pair
// lightness judgements, threshold selection (fixed, held-out, oracle),
// simulated test sets with pooled bootstrap statistics, treatment-effect
// tables, and the variance induced by averaging-layout randomness.

namespace iik::whdr {

// the two fixed decision thresholds used throughout
inline constexpr double kTauDefault = 0.1;
inline constexpr double kTauAlternative = 0.165;

struct Point {
    int id = 0;
    double x = 0.0;  // normalized [0,1]
    double y = 0.0;
};

// darker: '1' = point1 darker, '2' = point2 darker, 'E' = equal
struct Comparison {
    int point1 = 0;
    int point2 = 0;
    char darker = 'E';
    double weight = 1.0;
};

struct JudgementSet {
    std::vector<Point> points;
    std::vector<Comparison> comparisons;

    void validate() const;
    nlohmann::json to_json() const;  // IIW-style field names
    static JudgementSet from_json(const nlohmann::json& j);
};

JudgementSet load_judgements(const std::string& path);
void save_judgements(const std::string& path, const JudgementSet& js);

enum class DiffMode { kLinear, kLog };

std::string diff_mode_name(DiffMode m);
DiffMode diff_mode_from_name(const std::string& name);

struct PredictionRule {
    DiffMode mode = DiffMode::kLinear;
    double threshold = kTauDefault;

    void validate() const;
    nlohmann::json to_json() const;
    static PredictionRule from_json(const nlohmann::json& j);
};

// Bilinear sample of the channel mean at (x*(W-1), y*(H-1)), border clamped.
double lightness(const Tensor& albedo, double x, double y);

// id -> lightness for every point of the set
std::map<int, double> lightness_table(const Tensor& albedo, const JudgementSet& js);

// l1 - l2, or log l1 - log l2 with a 1e-4 floor
double lightness_difference(double l1, double l2, DiffMode mode);

// '1' / '2' / 'E'; boundary |d| == tau counts as equal
char predict(double l1, double l2, const PredictionRule& rule);

// weighted fraction of contradicted judgements; throws on zero total weight
// or a missing point id
double whdr(const JudgementSet& js, const std::map<int, double>& lightness, const PredictionRule& rule);

struct OracleResult {
    double tau = 0.0;
    double whdr = 0.0;
};

// Exact minimization over the breakpoint structure: WHDR is piecewise
// constant in tau, so scanning the midpoints between consecutive distinct
// |difference| values (plus one candidate below and above) finds the global
// optimum; ties resolve toward smaller tau.
OracleResult oracle_threshold(const JudgementSet& js, const std::map<int, double>& lightness,
                              DiffMode mode);

// oracle threshold of a (training) split, for use on a disjoint test split
double heldout_threshold(const JudgementSet& train, const std::map<int, double>& lightness,
                         DiffMode mode);

// n_sets subsets of ids, each image included with probability p; empty draws
// are rejected and redrawn
std::vector<std::vector<int>> simulated_test_sets(const std::vector<int>& ids, double p, int n_sets,
                                                  Rng& rng);

struct BoxplotStats {
    double median = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
    double notch = 0.0;       // 1.57 * IQR / sqrt(n), half-width
    double whisker_lo = 0.0;  // extreme data points within 1.5 * IQR of the quartiles
    double whisker_hi = 0.0;
    std::vector<double> outliers;  // ascending

    nlohmann::json to_json() const;
};

// Quartiles by linear interpolation at p*(n-1) over the sorted values.
BoxplotStats boxplot_stats(std::vector<double> values);

// one evaluated image: its judgements plus the per-point lightness of the
// predicted albedo
struct ImageEval {
    JudgementSet judgements;
    std::map<int, double> lightness;
};

struct BootstrapResult {
    std::vector<double> whdrs;  // one pooled WHDR per set
    BoxplotStats stats;
};

// WHDR pooled over all comparisons of each set's images
BootstrapResult bootstrap_whdr(const std::vector<ImageEval>& images,
                               const std::vector<std::vector<int>>& sets, const PredictionRule& rule);

// per-set differences W_A - W_B plus their boxplot statistics
struct TreatmentResult {
    std::vector<double> differences;
    BoxplotStats stats;
};

TreatmentResult treatment_effect(const std::vector<double>& whdrs_a, const std::vector<double>& whdrs_b);

// Re-runs the full decomposition `repeats` times with fresh layout seeds and
// reports the sample standard deviation (n-1) of the pooled WHDR.  The
// optional out-parameter receives the per-repeat WHDRs.
double averaging_variance(const infer::TileModel& model, infer::AveragingConfig cfg,
                          const std::vector<Tensor>& images, const std::vector<JudgementSet>& judgements,
                          const PredictionRule& rule, int repeats, std::vector<double>* whdrs = nullptr);

}  // namespace iik::whdr
