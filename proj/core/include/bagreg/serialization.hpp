#pragma once

#include "bagreg/models.hpp"

#include <string>

namespace bagreg {

/// Self-describing JSON document holding everything needed to predict.
std::string model_to_json(const RegressionModel& model);

/// Throws DataError on malformed documents and InvalidArgument on inconsistent models.
RegressionModel model_from_json(const std::string& text);

void save_model(const std::string& path, const RegressionModel& model);
RegressionModel load_model(const std::string& path);

}  // namespace bagreg
