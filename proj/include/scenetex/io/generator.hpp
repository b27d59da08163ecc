#pragma once

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>

#include "scenetex/condition.hpp"
#include "scenetex/error.hpp"
#include "scenetex/propagate.hpp"
#include "scenetex/io/config.hpp"
#include "scenetex/io/exr.hpp"
#include "scenetex/io/png.hpp"

namespace scenetex::io {

inline std::string condition_file(int channel) { return std::string("condition_") + kConditionChannelNames[static_cast<std::size_t>(channel)] + ".png"; }

/// Writes the seven conditioning channels as 8-bit grayscale PNGs plus
/// `condition.json` describing channel order and normalization.
inline void write_condition(const std::filesystem::path& dir, const ConditionTensor& cond, bool with_exr = false) {
  std::filesystem::create_directories(dir);
  json channels = json::array();
  for (int c = 0; c < kConditionChannels; ++c) {
    Image<std::uint8_t> img(cond.width(), cond.height(), 1, 0);
    for (std::size_t i = 0; i < img.data.size(); ++i)
      img.data[i] = static_cast<std::uint8_t>(std::lround(std::clamp(cond.data.data[i * kConditionChannels + c], 0.0f, 1.0f) * 255.0f));
    write_png(dir / condition_file(c), img);
    const char* encoding = c < 3 ? "(n + 1) / 2" : c < 6 ? "(p - bounds_min) / bounds_scale" : "binary";
    channels.push_back({{"index", c}, {"name", kConditionChannelNames[static_cast<std::size_t>(c)]},
                        {"file", condition_file(c)}, {"encoding", encoding}});
  }
  json manifest = {{"format_version", 1},
                   {"width", cond.width()},
                   {"height", cond.height()},
                   {"channels", channels},
                   {"bounds_min", detail::vec3_to(cond.bounds_min)},
                   {"bounds_scale", cond.bounds_scale},
                   {"empty_pixels", "all channels 0"}};
  if (with_exr) {
    std::vector<std::string> names(kConditionChannelNames.begin(), kConditionChannelNames.end());
    write_exr(dir / "condition.exr", cond.data, names);
    manifest["exr"] = "condition.exr";
  }
  save_json(dir / "condition.json", manifest);
}

/// Writes `dir/partial.png`, `dir/mask.png` (known = 255) when present, the
/// conditioning maps, `prompt.txt` and `packet.json`.
inline void write_packet(const std::filesystem::path& dir, const PropagationPacket& packet) {
  std::filesystem::create_directories(dir);
  if (packet.partial) write_rgb(dir / "partial.png", *packet.partial);
  if (packet.mask) write_mask(dir / "mask.png", *packet.mask);
  write_condition(dir, packet.condition);
  {
    std::ofstream p(dir / "prompt.txt");
    p << packet.prompt;
  }
  save_json(dir / "packet.json", {{"format_version", 1},
                                  {"index", packet.index},
                                  {"view", packet.view.name},
                                  {"weight", packet.view.weight},
                                  {"camera", camera_to_json(packet.view.camera)},
                                  {"partial", packet.partial ? json("partial.png") : json(nullptr)},
                                  {"mask", packet.mask ? json("mask.png") : json(nullptr)},
                                  {"condition", "condition.json"},
                                  {"prompt", "prompt.txt"},
                                  {"output", "generated.png"}});
}

/// Runs `command` through /bin/sh with `dir` as $1 and in SCENETEX_PACKET_DIR,
/// killing its process group after `timeout_s`. Returns an empty string on
/// success, otherwise a description of the failure.
inline std::string run_command(const std::string& command, const std::filesystem::path& dir, double timeout_s) {
  const pid_t pid = fork();
  if (pid < 0) return "fork failed";
  if (pid == 0) {
    setpgid(0, 0);
    setenv("SCENETEX_PACKET_DIR", dir.c_str(), 1);
    execl("/bin/sh", "sh", "-c", command.c_str(), "scenetex-generator", dir.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  setpgid(pid, pid);
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);
  int status = 0;
  while (true) {
    const pid_t r = waitpid(pid, &status, WNOHANG);
    if (r == pid) break;
    if (r < 0) return "waitpid failed";
    if (std::chrono::steady_clock::now() > deadline) {
      kill(-pid, SIGKILL);
      kill(pid, SIGKILL);
      waitpid(pid, &status, 0);
      return "timed out after " + std::to_string(timeout_s) + " s";
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  if (WIFEXITED(status) && WEXITSTATUS(status) == 0) return {};
  if (WIFEXITED(status)) return "command exited with status " + std::to_string(WEXITSTATUS(status));
  return "command terminated by a signal";
}

struct ProcessGeneratorOptions {
  std::string command;         // run through /bin/sh -c
  double timeout_s = 600.0;    // per attempt
  int retries = 1;             // extra attempts after a failure
};

/// Timeout override from SCENETEX_GENERATOR_TIMEOUT (seconds), if set and valid.
inline double generator_timeout_from_env(double fallback) {
  if (const char* v = std::getenv("SCENETEX_GENERATOR_TIMEOUT")) {
    char* end = nullptr;
    const double t = std::strtod(v, &end);
    if (end != v && t > 0.0) return t;
  }
  return fallback;
}

/// Directory handshake with an external program. For view i the packet is
/// written to `<work_dir>/packet_<i>/`; the command runs with that directory
/// as $1 and in SCENETEX_PACKET_DIR and must write `generated.png` there.
class ProcessGenerator : public ExternalGenerator {
 public:
  ProcessGenerator(std::filesystem::path work_dir, ProcessGeneratorOptions opt)
      : work_dir_(std::move(work_dir)), opt_(std::move(opt)) {
    if (opt_.command.empty()) throw Error(ErrorCode::InvalidInput, "generator command is empty");
  }

  RgbImage generate(const PropagationPacket& packet) override {
    const auto dir = work_dir_ / ("packet_" + std::to_string(packet.index));
    write_packet(dir, packet);
    const auto out = dir / "generated.png";
    std::string last_error;
    for (int attempt = 0; attempt <= opt_.retries; ++attempt) {
      std::filesystem::remove(out);
      last_error = run_command(opt_.command, dir, opt_.timeout_s);
      if (!last_error.empty()) continue;
      if (!std::filesystem::exists(out)) {
        last_error = "command did not write " + out.string();
        continue;
      }
      try {
        return read_rgb(out);
      } catch (const Error& e) {
        last_error = e.what();
      }
    }
    throw Error(ErrorCode::GeneratorFailure, "generator failed for view " + std::to_string(packet.index) + ": " + last_error);
  }

 private:
  std::filesystem::path work_dir_;
  ProcessGeneratorOptions opt_;
};

}  // namespace scenetex::io
