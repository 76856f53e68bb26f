#pragma once

#include <json.hpp>

#include "deeppam/pam.hpp"

namespace deeppam {

nlohmann::json terms_to_json(const std::vector<Term>& terms);
std::vector<Term> terms_from_json(const nlohmann::json& j);

nlohmann::json design_info_to_json(const DesignInfo& info);
DesignInfo design_info_from_json(const nlohmann::json& j);

}  // namespace deeppam
