#pragma once

#include <string_view>

// Data files from data/ embedded at build time (see cmake/embed_data.cmake).
namespace madroid::defaults {

std::string_view public_suffix_rules();
std::string_view seed_ad_libraries();
std::string_view seed_ad_hosts();
std::string_view gambling_keywords();
std::string_view close_keywords();

}  // namespace madroid::defaults
