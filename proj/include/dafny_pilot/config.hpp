#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "dafny_pilot/llm.hpp"
#include "dafny_pilot/repair_loop.hpp"
#include "dafny_pilot/verifier.hpp"

namespace dafny_pilot {

/// Everything one run needs besides its inputs.
struct EngineSettings {
    VerifierConfig verifier;
    ProviderConfig provider;
    LoopConfig loop;
};

using KeyValues = std::map<std::string, std::string>;

inline constexpr const char* kConfigFileName = "dafny-pilot.toml";

/// `key = value` lines; '#' starts a comment, values may be double-quoted.
/// Throws ParseError naming the offending line.
KeyValues parse_config_text(std::string_view text);
KeyValues load_config_file(const std::filesystem::path& path);

/// DAFNY_PILOT_<KEY> variables (key upper-cased) for every known key.
KeyValues config_from_environment();

/// Keys understood by apply_settings.
const std::vector<std::string>& known_config_keys();

/// Applies the given keys on top of `s`. Unknown keys and malformed values
/// throw InvalidArgument.
void apply_settings(EngineSettings& s, const KeyValues& kv);

/// Defaults, then environment, then the config file (when it exists), then
/// `flags`.
EngineSettings resolve_settings(const std::filesystem::path& config_file, const KeyValues& flags);

}  // namespace dafny_pilot
