#include "atmom/demos.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "atmom/error.hpp"

namespace atmom {

std::string to_string(Provenance p) { return p == Provenance::expert ? "expert" : "amateur"; }

std::size_t DemoSet::pair_count() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.pairs.size();
  return n;
}

std::vector<Sample> DemoSet::pairs() const {
  std::vector<Sample> out;
  out.reserve(pair_count());
  for (const auto& t : trajectories) out.insert(out.end(), t.pairs.begin(), t.pairs.end());
  return out;
}

namespace {

constexpr const char* kDemoMagic = "# atmom-demos 1";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

double parse_number(const std::string& s, std::size_t line_no) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw IoError("demos line " + std::to_string(line_no) + ": bad number '" + s + "'");
  return v;
}

}  // namespace

void write_demos(std::ostream& out, std::span<const Trajectory> trajectories) {
  std::size_t S = 0, A = 0;
  if (!trajectories.empty() && !trajectories.front().pairs.empty()) {
    S = trajectories.front().pairs.front().state.size();
    A = trajectories.front().pairs.front().action.size();
  }
  out << kDemoMagic << '\n';
  out << "traj_id,step,provenance,success";
  for (std::size_t i = 0; i < S; ++i) out << ",s" << i;
  for (std::size_t i = 0; i < A; ++i) out << ",a" << i;
  out << '\n';
  char buf[40];
  for (std::size_t t = 0; t < trajectories.size(); ++t) {
    const auto& traj = trajectories[t];
    for (std::size_t k = 0; k < traj.pairs.size(); ++k) {
      const auto& p = traj.pairs[k];
      require_same_size(p.state.size(), S, "write_demos (state)");
      require_same_size(p.action.size(), A, "write_demos (action)");
      out << t << ',' << k << ',' << to_string(traj.provenance) << ',' << (traj.success ? 1 : 0);
      for (double v : p.state) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << ',' << buf;
      }
      for (double v : p.action) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << ',' << buf;
      }
      out << '\n';
    }
  }
}

std::vector<Trajectory> read_demos(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t S = 0, A = 0;
  bool have_header = false;
  std::vector<Trajectory> out;
  long current_id = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_csv(line);
    if (!have_header) {
      if (fields.size() < 4 || fields[0] != "traj_id")
        throw IoError("demos: missing column header");
      for (std::size_t i = 4; i < fields.size(); ++i) {
        if (fields[i].starts_with('s'))
          ++S;
        else if (fields[i].starts_with('a'))
          ++A;
        else
          throw IoError("demos: unknown column '" + fields[i] + "'");
      }
      have_header = true;
      continue;
    }
    if (fields.size() != 4 + S + A)
      throw IoError("demos line " + std::to_string(line_no) + ": wrong column count");
    const long id = std::stol(fields[0]);
    const auto step = static_cast<std::size_t>(std::stoul(fields[1]));
    Provenance prov;
    if (fields[2] == "expert")
      prov = Provenance::expert;
    else if (fields[2] == "amateur")
      prov = Provenance::amateur;
    else
      throw IoError("demos line " + std::to_string(line_no) + ": bad provenance");
    if (id != current_id) {
      out.push_back({});
      out.back().provenance = prov;
      current_id = id;
    }
    auto& traj = out.back();
    if (step != traj.pairs.size())
      throw IoError("demos line " + std::to_string(line_no) + ": steps out of order");
    traj.success = fields[3] == "1";
    Sample s;
    s.state.reserve(S);
    s.action.reserve(A);
    for (std::size_t i = 0; i < S; ++i) s.state.push_back(parse_number(fields[4 + i], line_no));
    for (std::size_t i = 0; i < A; ++i) s.action.push_back(parse_number(fields[4 + S + i], line_no));
    traj.pairs.push_back(std::move(s));
  }
  return out;
}

}  // namespace atmom
