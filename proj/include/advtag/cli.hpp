#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "advtag/adversarial.hpp"
#include "advtag/data.hpp"
#include "advtag/network.hpp"
#include "advtag/trainer.hpp"

namespace advtag {

// Bad flags, bad config keys or values. Maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Everything `train` needs apart from data paths.
struct RunConfig {
  TrainConfig train;
  TaggerArchitecture arch;
  AdvConfig adv;
  std::int64_t min_count = 1;
  std::optional<std::filesystem::path> pretrained;
  bool char_frequency_weighting = false;
  CorpusLayout layout;
  bool iobes = false;
};

// Keys absent from `j` keep their current value in `base`. Unknown keys and
// wrongly typed values throw UsageError.
RunConfig apply_config(RunConfig base, const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& cfg);

struct RunManifest {
  RunConfig config;
  std::filesystem::path train_path;
  std::filesystem::path dev_path;
  std::filesystem::path checkpoint;
  std::filesystem::path epoch_log;
  std::string build_id;
  nlohmann::json timings = nlohmann::json::object();
  nlohmann::json result = nlohmann::json::object();
};

nlohmann::json manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

// One JSON object per epoch. Wall-clock time is kept out so that reruns
// produce identical logs; it lives in the manifest timings instead.
nlohmann::json epoch_to_json(const EpochRecord& rec);

// Predicted tags back in the corpus' own chunk encoding. For IOBES models the
// predictions are repaired span-wise and re-encoded as IOB2.
Corpus decode_predictions(const Model& model, const Corpus& predicted);

const char* build_id();

// Entry point. Returns 0 on success, 1 on runtime errors, 2 on usage errors.
int run_cli(int argc, char** argv);

}  // namespace advtag
