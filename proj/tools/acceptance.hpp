#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dasphys/model.hpp"

namespace dasphys::acceptance {

struct CriterionResult {
  std::string id;
  bool passed = false;
  std::string summary;
  nlohmann::json metrics;
  double seconds = 0.0;
};

// Artifacts shared between criteria (generators, the site-A debackground model)
// so each is trained once per suite run.
class Context {
 public:
  Context(std::filesystem::path out_dir, std::ostream& log);

  const std::filesystem::path& out_dir() const { return out_dir_; }
  std::ostream& log() { return log_; }

  const ModelBundle& sparse_generator();
  const ModelBundle& broadband_generator();
  const ModelBundle& debackground_model();

 private:
  std::filesystem::path out_dir_;
  std::ostream& log_;
  std::optional<ModelBundle> sparse_;
  std::optional<ModelBundle> broadband_;
  std::optional<ModelBundle> debackground_;
};

std::vector<std::string> criterion_ids();
CriterionResult run_criterion(const std::string& id, Context& ctx);

// "A1 PASS ..." / "A1 FAIL ...".
std::string result_line(const CriterionResult& r);

}  // namespace dasphys::acceptance
