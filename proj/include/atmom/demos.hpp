#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "atmom/numerics.hpp"

namespace atmom {

struct Sample {
  Vec state;
  Vec action;
};

enum class Provenance { expert, amateur };

std::string to_string(Provenance p);

struct Trajectory {
  std::vector<Sample> pairs;
  Provenance provenance = Provenance::expert;
  bool success = false;
};

struct DemoSet {
  std::vector<Trajectory> trajectories;
  double alpha = 0.0;  // amateur pairs / all pairs

  std::size_t pair_count() const;
  // Every (state, action) pair, trajectory order. Provenance is dropped.
  std::vector<Sample> pairs() const;
};

// Demonstration record format (text, one line per step):
//
//   # atmom-demos 1
//   traj_id,step,provenance,success,s0,...,s{S-1},a0,...,a{A-1}
//   0,0,expert,1,0.5,...
//
// Lines starting with '#' are comments. Numbers are decimal with 17 significant
// digits, so a write/read cycle is exact.
void write_demos(std::ostream& out, std::span<const Trajectory> trajectories);
std::vector<Trajectory> read_demos(std::istream& in);

}  // namespace atmom
