#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sparseqc/optimizer.hpp"

namespace sparseqc {

enum class ModelId { three_level, two_pes };

std::string to_string(ModelId id);
ModelId model_id_from_string(const std::string& name);
std::string to_string(CostKind kind);
CostKind cost_kind_from_string(const std::string& name);

/// Post-processing knobs: band-mass bands, low-frequency cutoff, spectrogram grid.
struct AnalysisConfig {
  std::vector<double> band_centers;
  double band_rel_width = 0.2;
  double low_cutoff = 0.0;
  double spectrogram_omega_max = 0.0;  ///< 0 -> 1.5 * operator omega_max
  std::size_t spectrogram_n_omega = 100;
  std::size_t spectrogram_n_centers = 14;
};

/// Everything a scenario run needs.  JSON layout mirrors the nesting
/// (model / operator / time / cost / init / optimizer / analysis).
struct ScenarioConfig {
  std::string name = "scenario";
  bool reduced = false;

  ModelId model = ModelId::three_level;
  TwoPesSpec two_pes;

  SynthesisKind kind = SynthesisKind::two_scale;
  EnvelopeKind space = EnvelopeKind::h1_0;
  double omega_min = 2.0;
  double omega_max = 5.0;
  std::size_t n_omega = 100;
  std::size_t n_centers = 0;  ///< gabor_tf time centers
  double sigma = 0.0;         ///< window width; <= 0 -> T / 20

  double t_final = 100.0;
  Eigen::Index n_steps = 4095;

  CostKind cost = CostKind::measure_huber;
  double alpha = 0.1;
  double theta = 1e-4;

  double init_norm = 0.1;  ///< U norm of the half-sine base envelope

  LbfgsOptions optimizer;
  int restarts = 1;

  AnalysisConfig analysis;
  std::string output_dir = "out";

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

nlohmann::json to_json(const ScenarioConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
ScenarioConfig config_from_json(const nlohmann::json& j);
ScenarioConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const ScenarioConfig& cfg);

/// The three-level setup, the six two-PES setups plus a kernel_space variant,
/// and a "_reduced" copy of each two-PES setup.
std::vector<ScenarioConfig> reference_configs();
/// Throws ConfigError for unknown names.
ScenarioConfig reference_config(const std::string& name);
/// Grids halved, state grid 128; kinds, spaces and costs unchanged.
ScenarioConfig reduce(const ScenarioConfig& cfg);

FrequencyGrid build_frequency_grid(const ScenarioConfig& cfg);
Model build_model(const ScenarioConfig& cfg);
Problem build_problem(const ScenarioConfig& cfg);
/// Half-sine base envelope of norm init_norm in the scenario's space.
Envelope base_envelope(const ScenarioConfig& cfg, const EnvelopeSpace& space);
Eigen::Index real_dof(const ScenarioConfig& cfg);

/// One-sided discrete spectrum of a field at ω_k = 2πk/T, k = 0..N/2.
struct FieldSpectrum {
  std::vector<double> omegas;
  Eigen::VectorXd magnitudes;
};
FieldSpectrum field_spectrum(const SampledField& v, const TimeGrid& grid);
/// Share of Σ|F_k|^2 (one-sided, interior bins doubled) at ω_k < cutoff.
double low_frequency_fraction(const FieldSpectrum& s, double cutoff);
/// Share of Σ ||u_ω||_U carried by atoms with |ω - c| <= rel c for some c.
double band_mass_fraction(const ControlMeasure& u, const EnvelopeSpace& space, const std::vector<double>& centers,
                          double rel_width);

struct ScenarioMetrics {
  double terminal_term = 0.0;
  double total = 0.0;
  std::size_t support_size = 0;
  double max_atom = 0.0;
  double band_mass = 0.0;
  double low_frequency_fraction = 0.0;
  /// Atoms by decreasing norm: (omega, t_center, norm), at most 8.
  std::vector<std::array<double, 3>> largest_atoms;
};

ScenarioMetrics compute_metrics(const ScenarioConfig& cfg, const Problem& problem, const RunResult& run);

struct ScenarioOutcome {
  RunResult run;
  ScenarioMetrics metrics;
  std::vector<std::filesystem::path> files;
};

/// minimize_with_restarts on the scenario; with `write_artifacts` emits
/// field.csv, spectrum.csv, spectrogram.csv, measure.csv, optimality.json,
/// iterations.csv and summary.csv into cfg.output_dir.
ScenarioOutcome run_scenario(const ScenarioConfig& cfg, int jobs = 1, bool write_artifacts = true);

/// continuation_sweep over `alphas` (must ascend); writes sweep.csv when asked.
std::vector<SweepStage> run_sweep(const ScenarioConfig& cfg, const std::vector<double>& alphas,
                                  bool write_artifacts = true);

/// Key/value summary (terminal term, support, metrics, termination, wall time).
void write_summary_csv(const std::filesystem::path& path, const ScenarioConfig& cfg, const ScenarioOutcome& out);

struct GradCheckEntry {
  std::string model;
  SynthesisKind kind;
  double max_rel_error = 0.0;
  double seconds = 0.0;
};

/// Adjoint gradient against Richardson central differences for every
/// (model, kind) pair at reduced size, `directions` random directions each.
std::vector<GradCheckEntry> gradient_check_matrix(int directions, std::uint64_t seed, bool reduced = true);

}  // namespace sparseqc
