// Copyright (c) 2026 rollsim contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rollsim/training.hpp"

namespace rollsim {

// Deterministic number formatting shared by every emitter so that identical
// runs produce byte-identical files.
std::string format_double(double v);

std::string steps_csv(const TrainingResult& result);
std::string events_jsonl(const TrainingResult& result);
std::string plans_jsonl(const TrainingResult& result);
nlohmann::json summary_json(const std::vector<TrainingResult>& results);
std::string comparison_csv(const std::vector<TrainingResult>& results);
std::string comparison_table(const std::vector<TrainingResult>& results);

// Writes via a temp file and rename so partial output never lands.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace rollsim
