// Experiment runner behind the ergolab executable: flat key=value configs,
// a worker pool over pure library calls, results.csv and summary.json.
#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace ergo::cli {

inline constexpr int kFormatVersion = 1;

enum ExitCode { kExitOk = 0, kExitHypothesis = 1, kExitNumerical = 2, kExitConfig = 3 };

const std::vector<std::string>& subcommands();

// Every key a subcommand reads, with its default ("" means unset).
const std::map<std::string, std::string>& default_config(const std::string& subcommand);

struct RunConfig {
    std::string subcommand;
    std::map<std::string, std::string> values;  // resolved: defaults, then file, then flags

    const std::string& get(const std::string& key) const;
};

// key=value lines, '#' comments. A summary.json is also accepted: its "config" object is used.
std::map<std::string, std::string> parse_config_text(const std::string& text);

// Unknown keys raise ConfigError.
RunConfig resolve_config(const std::string& subcommand, const std::map<std::string, std::string>& file_values,
                         const std::map<std::string, std::string>& flag_values);

// Output directory: `out`, else $RESULTS_DIR/<subcommand>, else results/<subcommand>.
std::string output_directory(const RunConfig& cfg);

// Runs one experiment and writes its files; returns the exit code.
int run(const RunConfig& cfg, std::ostream& log);

// argv[1] is the subcommand.
int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace ergo::cli
