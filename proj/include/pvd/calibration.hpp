#pragma once

namespace pvd {

/// Per-unit operator costs in milliseconds.
struct Calibration {
  double c_scan = 2e-5;   // per row scanned by the interpreter
  double c_hash = 5e-5;   // per row inserted into a hash table
  double c_probe = 2e-4;  // per hash/binary-search probe
  double c_sort = 1e-5;   // per n·log2(n) unit
  double c_cell = 2e-5;   // per cube cell touched

  Calibration scaled(double factor) const {
    return {c_scan * factor, c_hash * factor, c_probe * factor, c_sort * factor, c_cell * factor};
  }
  bool valid() const { return c_scan > 0 && c_hash > 0 && c_probe > 0 && c_sort > 0 && c_cell > 0; }
};

}  // namespace pvd
