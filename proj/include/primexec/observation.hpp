#pragma once

#include "primexec/geometry.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace primexec {

/// One scene object as the planner sees it: symbolic identity plus image-space position.
struct ObjectView {
  std::string id;
  std::string category;
  std::vector<std::string> attributes;
  Destination image_position;

  friend bool operator==(const ObjectView&, const ObjectView&) = default;
};

struct Observation {
  Destination arm_image_position;
  std::vector<ObjectView> object_views;
  std::uint64_t frame_id = 0;

  friend bool operator==(const Observation&, const Observation&) = default;
};

}  // namespace primexec
