#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "polereloc/evaluation.hpp"
#include "polereloc/extraction.hpp"
#include "polereloc/io.hpp"
#include "polereloc/localization.hpp"
#include "polereloc/registration.hpp"
#include "polereloc/sim.hpp"

namespace polereloc {

/// Every tunable of the toolkit. Missing keys keep these defaults.
struct Config {
  ExtractionParams extraction;
  RegistrationParams registration;
  AssociationParams association;
  RelocParams reloc;
  PipelineConfig pipeline;
  SceneSpec scene;
  RunSpec run;
  DriftSpec drift;
  RelocEvalSpec eval;
  LabelDictionary labels;

  PipelineSettings settings() const { return {extraction, association, reloc, pipeline}; }
  void validate() const;
};

/// `group.name = value` lines; '#' starts a comment. Unknown or repeated
/// keys and malformed values are kConfig errors naming the line.
Config parse_config(std::string_view text);
Config load_config(const std::filesystem::path& path);
/// Every key with its current value, in a form parse_config accepts.
std::string format_config(const Config& config);
std::vector<std::string> config_keys();

}  // namespace polereloc
