#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <selekt/selekt.h>

namespace fs = std::filesystem;

namespace {

const char* kTinyArch =
    R"({"image_size": 8, "classes": 3, "widths": [4, 8], "strides": [1, 2]})";
const char* kLinearArch =
    R"({"family": "linear", "in_channels": 1, "image_size": 2, "classes": 2})";

struct Dir {
  fs::path path;
  explicit Dir(const std::string& tag) {
    std::random_device rd;
    path = fs::temp_directory_path() / ("selekt-capi-" + tag + "-" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~Dir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string take(char* s) {
  std::string out = s != nullptr ? s : "";
  selekt_string_free(s);
  return out;
}

}  // namespace

TEST_CASE("status names and error state") {
  CHECK(std::string(selekt_status_name(SELEKT_OK)) == "ok");
  CHECK(std::string(selekt_status_name(SELEKT_INVALID_ARGUMENT)) == "invalid_argument");
  CHECK(std::string(selekt_status_name(SELEKT_DIVERGED_RUN)) == "diverged_run");
  CHECK(std::string(selekt_version()).size() > 0);
  CHECK(selekt_set_log_level("warn") == SELEKT_OK);
  CHECK(std::string(selekt_last_error()).empty());
  CHECK(selekt_set_log_level("loud") == SELEKT_INVALID_ARGUMENT);
  CHECK(std::string(selekt_last_error()).find("loud") != std::string::npos);
  CHECK(std::string(selekt_last_error_field()) == "log-level");
  CHECK(selekt_set_log_level("warn") == SELEKT_OK);
  CHECK(std::string(selekt_last_error_field()).empty());

  selekt_model* m = nullptr;
  CHECK(selekt_model_create(R"({"classes": 1})", 0, &m) == SELEKT_INVALID_ARGUMENT);
  CHECK(std::string(selekt_last_error_field()) == "arch.classes");
  CHECK(m == nullptr);
  CHECK(selekt_model_create("{not json", 0, &m) == SELEKT_INVALID_ARGUMENT);
  CHECK(selekt_model_create(kTinyArch, 0, nullptr) == SELEKT_INVALID_ARGUMENT);
  CHECK(selekt_model_load("/nonexistent/checkpoint.bin", &m) == SELEKT_NOT_FOUND);
  selekt_string_free(nullptr);
}

TEST_CASE("model handles") {
  selekt_model* m = nullptr;
  REQUIRE(selekt_model_create(kTinyArch, 7, &m) == SELEKT_OK);
  size_t in = 0, classes = 0, params = 0, layers = 0, units = 0;
  CHECK(selekt_model_input_size(m, &in) == SELEKT_OK);
  CHECK(in == 3 * 8 * 8);
  CHECK(selekt_model_classes(m, &classes) == SELEKT_OK);
  CHECK(classes == 3);
  CHECK(selekt_model_param_count(m, &params) == SELEKT_OK);
  CHECK(selekt_model_layer_count(m, &layers) == SELEKT_OK);
  CHECK(layers == 2);
  CHECK(selekt_model_layer_units(m, 1, &units) == SELEKT_OK);
  CHECK(units == 8);
  CHECK(selekt_model_layer_units(m, 2, &units) == SELEKT_INVALID_ARGUMENT);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> x(2 * in);
  for (auto& v : x) v = u(rng);
  std::vector<float> logits(2 * classes);
  REQUIRE(selekt_model_forward(m, x.data(), 2, logits.data()) == SELEKT_OK);
  for (float v : logits) CHECK(std::isfinite(v));

  std::vector<float> acts(2 * 8);
  CHECK(selekt_model_activations(m, x.data(), 2, 1, acts.data()) == SELEKT_OK);
  for (float v : acts) CHECK(v >= 0.0f);

  // Save, load and compare outputs.
  Dir dir("model");
  const std::string path = (dir.path / "m.bin").string();
  REQUIRE(selekt_model_save(m, path.c_str()) == SELEKT_OK);
  selekt_model* back = nullptr;
  REQUIRE(selekt_model_load(path.c_str(), &back) == SELEKT_OK);
  std::vector<float> logits2(2 * classes);
  REQUIRE(selekt_model_forward(back, x.data(), 2, logits2.data()) == SELEKT_OK);
  CHECK(logits2 == logits);
  std::vector<float> p1(params), p2(params);
  CHECK(selekt_model_params(m, p1.data(), params) == SELEKT_OK);
  CHECK(selekt_model_params(back, p2.data(), params) == SELEKT_OK);
  CHECK(p1 == p2);
  CHECK(selekt_model_params(m, p1.data(), params - 1) != SELEKT_OK);

  // Rebuilding from the parameters with default running statistics gives a
  // model of the same size.
  selekt_model* rebuilt = nullptr;
  CHECK(selekt_model_from_params(kTinyArch, p1.data(), params, &rebuilt) == SELEKT_OK);
  CHECK(selekt_model_from_params(kTinyArch, p1.data(), params - 1, &rebuilt) ==
        SELEKT_SHAPE_MISMATCH);
  selekt_model_free(rebuilt);
  selekt_model_free(back);
  selekt_model_free(m);
  selekt_model_free(nullptr);
}

TEST_CASE("linear model: jacobian and attacks through the C API") {
  // logits = W x + b with W = [[1, 0, 0, 0], [0, 0, 0, 1]].
  const std::vector<float> params{1, 0, 0, 0, 0, 0, 0, 1, 0, 0};
  selekt_model* m = nullptr;
  REQUIRE(selekt_model_from_params(kLinearArch, params.data(), params.size(), &m) == SELEKT_OK);
  const std::vector<float> x{0.5f, 0.5f, 0.5f, 0.5f};
  std::vector<double> jac(2 * 4);
  REQUIRE(selekt_model_jacobian(m, x.data(), jac.data()) == SELEKT_OK);
  CHECK(jac == std::vector<double>{1, 0, 0, 0, 0, 0, 0, 1});

  // Label 0: the loss gradient raises pixel 3 and lowers pixel 0.
  const int label = 0;
  std::vector<float> adv(4);
  REQUIRE(selekt_fgsm(m, x.data(), &label, 1, 0.1, adv.data()) == SELEKT_OK);
  CHECK(adv[0] == doctest::Approx(0.4));
  CHECK(adv[1] == doctest::Approx(0.5));
  CHECK(adv[3] == doctest::Approx(0.6));
  REQUIRE(selekt_pgd(m, x.data(), &label, 1, 0.1, 0.03, 10, adv.data()) == SELEKT_OK);
  CHECK(adv[0] == doctest::Approx(0.4));
  CHECK(adv[3] == doctest::Approx(0.6));
  CHECK(selekt_pgd(m, x.data(), &label, 1, -0.1, 0.03, 10, adv.data()) ==
        SELEKT_INVALID_ARGUMENT);
  const int bad = 5;
  CHECK(selekt_fgsm(m, x.data(), &bad, 1, 0.1, adv.data()) != SELEKT_OK);
  selekt_model_free(m);
}

TEST_CASE("numeric helpers") {
  const std::vector<double> means{0.6, 0.2, 0.2, 0.2, 1.0, 1.0, 1.0, 1.0};
  std::vector<double> si(2);
  REQUIRE(selekt_selectivity_index(means.data(), 2, 4, si.data()) == SELEKT_OK);
  CHECK(si[0] == doctest::Approx(0.5));
  CHECK(si[1] == doctest::Approx(0.0));

  // Rank-one matrix.
  std::vector<double> m(20 * 3);
  for (int r = 0; r < 20; ++r)
    for (int c = 0; c < 3; ++c) m[r * 3 + c] = (r - 9.5) * (c + 1);
  int dims = -1;
  REQUIRE(selekt_dims_to_variance(m.data(), 20, 3, 0.9, 1, &dims) == SELEKT_OK);
  CHECK(dims == 1);
  CHECK(selekt_dims_to_variance(m.data(), 20, 3, 1.5, 1, &dims) == SELEKT_INVALID_ARGUMENT);

  const std::vector<double> v{0.2, 0.4, 0.6};
  double ci[3];
  REQUIRE(selekt_bootstrap_ci(v.data(), v.size(), 0.95, 2000, 1, ci) == SELEKT_OK);
  CHECK(ci[0] == doctest::Approx(0.4));
  CHECK(ci[1] <= ci[0]);
  CHECK(ci[2] >= ci[0]);
  CHECK(selekt_bootstrap_ci(v.data(), 0, 0.95, 2000, 1, ci) == SELEKT_INVALID_ARGUMENT);
}

TEST_CASE("dataset handles") {
  selekt_dataset* d = nullptr;
  REQUIRE(selekt_dataset_load(
              R"({"classes": 3, "image_size": 16, "train_per_class": 4, "test_per_class": 2})",
              &d) == SELEKT_OK);
  size_t train = 0, test = 0;
  CHECK(selekt_dataset_size(d, 0, &train) == SELEKT_OK);
  CHECK(selekt_dataset_size(d, 1, &test) == SELEKT_OK);
  CHECK(train == 12);
  CHECK(test == 6);
  CHECK(selekt_dataset_size(d, 2, &test) == SELEKT_INVALID_ARGUMENT);
  std::vector<float> px(test * 3 * 16 * 16);
  std::vector<int> labels(test);
  REQUIRE(selekt_dataset_copy(d, 1, px.data(), labels.data()) == SELEKT_OK);
  for (float p : px) CHECK((p >= 0.0f && p <= 1.0f));
  CHECK(labels == std::vector<int>{0, 1, 2, 0, 1, 2});
  Dir dir("data");
  CHECK(selekt_dataset_materialize(d, dir.path.string().c_str()) == SELEKT_OK);
  selekt_dataset_free(d);
  CHECK(selekt_dataset_load(R"({"source": "web"})", &d) == SELEKT_INVALID_ARGUMENT);
}

TEST_CASE("commands through the C API") {
  Dir dir("cmds");
  const fs::path config = dir.path / "tiny.json";
  std::ofstream(config) << R"({
    "arch": {"image_size": 16, "classes": 3, "widths": [4, 8], "strides": [1, 2]},
    "dataset": {"train_per_class": 30, "test_per_class": 10},
    "epochs": 2, "batch_size": 16, "anneal_epochs": [1],
    "validation": {"policy": "per_class", "per_class": 5},
    "evaluation": {"max_samples": 20, "epsilons": [0, 0.01], "pgd_steps": [1, 2],
                   "corruptions": ["brightness"], "severities": [1],
                   "dims_samples": 30, "dims_perturbations": ["clean", "pgd2"],
                   "jacobian_samples": 3}
  })";
  const std::string runs = (dir.path / "runs").string();

  char* out = nullptr;
  CHECK(selekt_cmd_train(config.c_str(), "notanumber", nullptr, runs.c_str(), &out) ==
        SELEKT_INVALID_ARGUMENT);
  CHECK(std::string(selekt_last_error_field()) == "alpha");
  CHECK(out == nullptr);

  REQUIRE(selekt_cmd_sweep(config.c_str(), "-1,1", "0", runs.c_str(), &out) == SELEKT_OK);
  const std::string sweep = take(out);
  CHECK(sweep.front() == '[');
  CHECK(sweep.find("\"alpha\":-1.0") != std::string::npos);

  REQUIRE(selekt_cmd_train(config.c_str(), "0.5", "2", runs.c_str(), &out) == SELEKT_OK);
  const std::string rec = take(out);
  CHECK(rec.find("\"run_id\":\"00002-") != std::string::npos);

  const char* kinds[] = {R"({"kind": "attack"})", R"({"kind": "attack", "method": "pgd"})",
                         R"({"kind": "corrupt"})", R"({"kind": "dims"})",
                         R"({"kind": "jacobian"})"};
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(runs)) ids.push_back(e.path().filename().string());
  REQUIRE(ids.size() == 3);
  for (const auto& id : ids) {
    for (const char* k : kinds) {
      const std::string request = k;
      CAPTURE(request);
      CHECK(selekt_cmd_evaluate(runs.c_str(), id.c_str(), k, nullptr) == SELEKT_OK);
    }
  }
  CHECK(selekt_cmd_evaluate(runs.c_str(), ids[0].c_str(), "{bad", nullptr) ==
        SELEKT_INVALID_ARGUMENT);
  CHECK(std::string(selekt_last_error_field()) == "request");
  CHECK(selekt_cmd_evaluate(runs.c_str(), "00009-00000000", R"({"kind": "attack"})", nullptr) ==
        SELEKT_NOT_FOUND);

  REQUIRE(selekt_cmd_validate(runs.c_str(), &out) == SELEKT_OK);
  CHECK(take(out) == "[]");

  const std::string report = (dir.path / "report").string();
  REQUIRE(selekt_cmd_report(runs.c_str(), report.c_str(), &out) == SELEKT_OK);
  CHECK(take(out).find("clean_acc") != std::string::npos);
  const std::string summary = report + "/summary.json";
  REQUIRE(selekt_cmd_plot(summary.c_str(), "acc-vs-alpha", nullptr, nullptr, &out) == SELEKT_OK);
  CHECK(fs::exists(take(out)));
  CHECK(selekt_cmd_plot(summary.c_str(), "pie", nullptr, nullptr, &out) ==
        SELEKT_INVALID_ARGUMENT);
  CHECK(selekt_cmd_materialize(config.c_str(), (dir.path / "data").c_str()) == SELEKT_OK);
}
