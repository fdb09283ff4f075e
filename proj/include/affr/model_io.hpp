#pragma once

// Model files: one JSON document per model.
//
//   {"version": 1, "variant": "affr" | "lmr" | "lmf",
//    "grid": {"points": [...], "weights": [...]},
//    affr: "kernel": {"family", "delta", "mask"}, "lambda",
//          "alpha", "eigenfunctions", "x_train" (matrices as
//          {"rows", "cols", "data"} row-major), "eigenvalues", "pev", "y_mean"
//    linear: "x_mean", "y_mean", "x_eigenfunctions", "y_eigenfunctions",
//            "coefficients"}
//
// Doubles are written in shortest round-trip form, so a reloaded model
// predicts bit-for-bit like the original.

#include <string>
#include <variant>

#include "affr/baselines.hpp"
#include "affr/estimator.hpp"

namespace affr {

inline constexpr int kModelFormatVersion = 1;

using AnyModel = std::variant<AffrModel, LinearFofModel>;

std::string to_json_text(const AffrModel& model);
std::string to_json_text(const LinearFofModel& model);
AnyModel model_from_json_text(const std::string& text);

void save_model(const AnyModel& model, const std::string& path);
AnyModel load_model(const std::string& path);

FunctionalSample predict(const AnyModel& model, const FunctionalSample& x_new);

}  // namespace affr
