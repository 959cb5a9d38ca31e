#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "atesa/corpus.hpp"
#include "atesa/encoder.hpp"
#include "atesa/heads.hpp"
#include "atesa/training.hpp"

namespace atesa::testing {

inline const std::string kFigureSentence = "I liked the pizza and the open kitchen";

std::filesystem::path data_dir();
std::vector<TaggedExample> toy_corpus();

// Stub encoder and training settings under which every head kind memorizes
// the toy corpus.
EncoderSpec overfit_encoder_spec();
HeadConfig overfit_head_config(HeadKind kind, Branch branch);
TrainConfig overfit_train_config(int epochs = 200);

// Six stub-backed members per branch (three head kinds x two encoder seeds)
// trained on the toy corpus. Writes <dir>/ate.json and <dir>/atsa.json.
void build_fixture_models(const std::filesystem::path& dir);

// Directory the fixture-setup test writes to.
std::filesystem::path fixture_models_dir();

// Fresh scratch directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace atesa::testing
