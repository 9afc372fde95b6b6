#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "madvm/demand.hpp"

namespace madvm {

// CSV schema: header `vm_id,slot,cpu`, one row per (vm, slot), rows sorted
// by (slot, vm_id) on output. Input order is free but every cell must be
// present exactly once.
DemandTrace read_trace_csv(std::istream& in);
DemandTrace load_trace(const std::filesystem::path& path);

void write_trace_csv(std::ostream& out, const DemandTrace& trace);
void save_trace(const std::filesystem::path& path, const DemandTrace& trace);

// Row-major JSON arrays, e.g. [[0.9,0.1],[0.5,0.5]].
std::string chain_to_json(const DemandChain& chain);
DemandChain chain_from_json(const std::string& text);

} // namespace madvm
