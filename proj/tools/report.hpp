#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "scenetex/error.hpp"
#include "scenetex/io/config.hpp"

namespace scenetex::cli {

using nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kReportFormatVersion = 1;

/// Structured run report written by every subcommand (schema in
/// docs/run_report.schema.json).
class RunReport {
 public:
  RunReport(std::string command, std::uint64_t seed) : start_(std::chrono::steady_clock::now()) {
    doc_ = {{"format_version", kReportFormatVersion},
            {"tool", "scenetex"},
            {"tool_version", kToolVersion},
            {"command", std::move(command)},
            {"status", "ok"},
            {"exit_code", 0},
            {"error", nullptr},
            {"seed", seed},
            {"inputs", json::object()},
            {"outputs", json::array()},
            {"config", json::object()},
            {"metrics", json::object()},
            {"timings_s", json::object()},
            {"instances", json::array()},
            {"skipped_instances", json::array()},
            {"warnings", json::array()}};
  }

  json& doc() { return doc_; }
  json& metrics() { return doc_["metrics"]; }
  json& config() { return doc_["config"]; }

  void input(const std::string& key, const json& value) { doc_["inputs"][key] = value; }
  void output(const std::filesystem::path& p) { doc_["outputs"].push_back(p.string()); }
  void instance(json entry) { doc_["instances"].push_back(std::move(entry)); }
  void skip(const std::string& name, const std::string& reason) {
    doc_["skipped_instances"].push_back({{"name", name}, {"reason", reason}});
  }
  void warn(const std::string& message) { doc_["warnings"].push_back(message); }
  void timing(const std::string& stage, double seconds) { doc_["timings_s"][stage] = seconds; }

  void fail(int exit_code, const std::string& code, const std::string& message) {
    doc_["status"] = "error";
    doc_["exit_code"] = exit_code;
    doc_["error"] = {{"code", code}, {"message", message}};
  }

  const json& finish() {
    doc_["timings_s"]["total"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    return doc_;
  }

 private:
  json doc_;
  std::chrono::steady_clock::time_point start_;
};

/// Records the wall time of a scope under `stage`.
class StageTimer {
 public:
  StageTimer(RunReport& report, std::string stage)
      : report_(report), stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    auto& t = report_.doc()["timings_s"];
    t[stage_] = t.value(stage_, 0.0) + s;
  }
  StageTimer(const StageTimer&) = delete;
  StageTimer& operator=(const StageTimer&) = delete;

 private:
  RunReport& report_;
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace scenetex::cli
