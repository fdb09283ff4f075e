#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>

#include "affr/errors.hpp"
#include "affr/model_io.hpp"
#include "affr/sim.hpp"

using namespace affr;

namespace {

double max_drift(const AnyModel& model, const FunctionalSample& x) {
  const AnyModel back = model_from_json_text(std::visit([](const auto& m) { return to_json_text(m); }, model));
  return (predict(model, x).values - predict(back, x).values).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("models round-trip through JSON") {
  const Dataset d = gen_dataset(ScenarioTag::b, 15, 12, 0.25, 1);
  const Dataset fresh = gen_dataset(ScenarioTag::b, 5, 12, 0.25, 2);
  for (auto mask : {DomainMask::none(), DomainMask::historical()})
    for (auto fam : {KernelFamily::gaussian, KernelFamily::exponential}) {
      const AffrModel m = fit(d.x, d.y, KernelSpec(fam, 0.7, mask), TruncationRule::fixed(3), 0.01);
      CHECK(max_drift(m, fresh.x) <= 1e-12);
      const auto back = std::get<AffrModel>(model_from_json_text(to_json_text(m)));
      CHECK(back.alpha == m.alpha);
      CHECK(back.kernel.mask.kind == mask.kind);
      CHECK(back.kernel.family == fam);
      CHECK(back.lambda == m.lambda);
      CHECK(back.basis.pev == m.basis.pev);
    }
  CHECK(max_drift(fit_lmr(d.x, d.y, 3, 3), fresh.x) <= 1e-12);
  CHECK(max_drift(fit_lmf(d.x, d.y, 3), fresh.x) <= 1e-12);
}

TEST_CASE("serialization is byte-stable") {
  const Dataset d = gen_dataset(ScenarioTag::a, 10, 9, 0.25, 3);
  const AffrModel m = fit(d.x, d.y, KernelSpec(), TruncationRule::fixed(2), 0.1);
  const std::string text = to_json_text(m);
  const auto back = std::get<AffrModel>(model_from_json_text(text));
  CHECK(to_json_text(back) == text);
}

TEST_CASE("model files on disk") {
  const Dataset d = gen_dataset(ScenarioTag::c, 10, 9, 0.25, 4);
  const AnyModel m = fit_lmf(d.x, d.y, 2);
  const std::string path = "test_model_io_tmp.json";
  save_model(m, path);
  CHECK(max_drift(load_model(path), d.x) == 0.0);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_model("/nonexistent/model.json"), IoError);
}

TEST_CASE("malformed model files") {
  CHECK_THROWS_AS(model_from_json_text("not json"), IoError);
  CHECK_THROWS_AS(model_from_json_text("{\"version\": 2}"), IoError);
  CHECK_THROWS_AS(model_from_json_text("{\"version\": 1, \"variant\": \"affr\"}"), IoError);
  CHECK_THROWS_AS(model_from_json_text("{\"version\": 1, \"variant\": \"other\", \"grid\": {\"points\": [0, 1], "
                                       "\"weights\": [0.5, 0.5]}}"),
                  IoError);
  const Dataset d = gen_dataset(ScenarioTag::a, 6, 9, 0.25, 5);
  AffrModel m = fit(d.x, d.y, KernelSpec(), TruncationRule::fixed(2), 0.1);
  m.kernel.mask = DomainMask::interval([](double t) { return std::pair{0.0, t}; });
  CHECK_THROWS_AS(to_json_text(m), InvalidArgument);
}
