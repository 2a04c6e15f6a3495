#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "pvd/plan.hpp"
#include "pvd/relation.hpp"
#include "pvd/synth.hpp"

namespace pvd::testing {

inline Relation make_rel(const std::string& name, const Schema& schema, const std::vector<std::vector<Value>>& rows) {
  RelationBuilder b(name, schema);
  for (const auto& r : rows) b.add_row(r);
  return std::move(b).finish();
}

inline RelationPtr share(Relation r) { return std::make_shared<const Relation>(std::move(r)); }

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  static std::atomic<int> n{0};
  auto p = std::filesystem::temp_directory_path() /
           ("pvd_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(n++));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

/// Small congress instance: fast enough for exhaustive sweeps inside unit tests.
inline Generated small_congress(std::size_t rows = 3000, std::size_t members = 30) {
  SynthOptions o;
  o.rows = rows;
  o.members = members;
  return generate(SynthKind::Congress, o);
}

}  // namespace pvd::testing
