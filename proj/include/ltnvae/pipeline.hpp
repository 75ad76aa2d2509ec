#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ltnvae/config.hpp"
#include "ltnvae/metrics.hpp"
#include "ltnvae/reasoner.hpp"

namespace ltnvae {

// Command implementations shared by the CLI and the test suites. Each writes
// its artifacts under cfg.out_dir and stamps them with the config digest and
// the dataset manifest digest.

struct GenDataResult {
  std::string dir;
  std::string manifest_digest;
};
GenDataResult run_gen_data(const RunConfig& cfg);

struct TrainArtifacts {
  std::string checkpoint_stem;  // <out>/checkpoint -> .ckpt/.json
  std::string history_path;     // <out>/history.csv
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  bool diverged = false;
};
TrainArtifacts run_train(const RunConfig& cfg);

// One persisted reasoner per factor; returns the file paths.
std::vector<std::string> run_calibrate(const RunConfig& cfg,
                                       const std::string& checkpoint_stem);

struct EvalResult {
  nlohmann::json summary;       // also written to <out>/metrics.json
  std::string summary_path;
  std::string mi_csv_path;
  std::string latents_path;
};
EvalResult run_evaluate(const RunConfig& cfg, const std::string& checkpoint_stem,
                        const std::vector<std::string>& reasoner_paths);

// Per image, per factor: density, tau and the OOD flag. Unreadable images
// produce an error line and processing continues; the command itself always
// succeeds (verdicts are data).
void run_reason(const std::string& checkpoint_stem,
                const std::vector<std::string>& reasoner_paths,
                const std::vector<std::string>& image_paths, std::ostream& out);

// Encode a list of samples in manageable batches (eval mode).
std::vector<LatentCode> encode_samples(VaeModel<double>& model,
                                       const std::vector<Sample>& samples,
                                       const std::vector<std::size_t>& indices);

}  // namespace ltnvae
