#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rrl/backtest.hpp"

namespace rrl::cli {

inline constexpr std::string_view kArtifactVersion = "1.0.0";

enum ExitCode : int { kOk = 0, kUsage = 1, kIo = 2, kNumeric = 3 };

// io.* and data.* -> 2, numeric.* -> 3, everything else -> 1.
int exit_code_for(std::string_view category);

struct RunManifest {
  std::filesystem::path config;
  std::filesystem::path data;  // empty for synthetic markets
  std::filesystem::path out;
  std::uint64_t seed = 0;
  std::string version{kArtifactVersion};
};

void write_manifest(std::ostream& out, const RunManifest& m, std::string_view command);

struct TrainOptions {
  std::filesystem::path config;
  std::optional<std::filesystem::path> data;
  std::filesystem::path out = ".";
  std::optional<std::uint64_t> seed;
};

struct SuiteOptions {
  std::optional<std::string> preset;
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> data;
  std::filesystem::path out = ".";
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
};

struct PlotOptions {
  std::filesystem::path report;
  std::filesystem::path out = ".";
};

// The series equals what an experiment with data = synthetic:<market> and the
// same seed generates in process.
struct GenerateOptions {
  std::string market = "sine";
  std::size_t bars = 2000;
  std::uint64_t seed = 1;
  std::filesystem::path out;
};

// Each command returns its exit code. Errors are reported on `err` as one
// line: "error category=<category> message=<text>".
int cmd_train(const TrainOptions& opt, std::ostream& log, std::ostream& err);
int cmd_suite(const SuiteOptions& opt, std::ostream& log, std::ostream& err);
int cmd_plotdata(const PlotOptions& opt, std::ostream& log, std::ostream& err);
int cmd_generate(const GenerateOptions& opt, std::ostream& log, std::ostream& err);

// Grid from a config file: the base experiment plus optional "grid.<key> =
// v1|v2|..." sweeps, expanded as a cartesian product. Throws Usage when the
// file defines no sweep.
backtest::ExperimentGrid grid_from_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed);

// Writes the per-figure-panel CSVs for a parsed report and returns the paths.
std::vector<std::filesystem::path> write_plot_data(const backtest::ParsedReport& report,
                                                   const std::filesystem::path& out_dir);

int run(int argc, char** argv);

}  // namespace rrl::cli
