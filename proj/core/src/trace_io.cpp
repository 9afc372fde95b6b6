#include "madvm/trace_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <utility>

#include <nlohmann/json.hpp>

#include "madvm/errors.hpp"

namespace madvm {

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string_view> split(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

std::size_t parse_index(std::string_view field, std::size_t row, const char* name)
{
    std::size_t v = 0;
    const auto* end = field.data() + field.size();
    auto [p, ec] = std::from_chars(field.data(), end, v);
    if (ec != std::errc{} || p != end || field.empty()) {
        throw InputError("trace row " + std::to_string(row) + ": bad " + name + " '" + std::string(field) + "'");
    }
    return v;
}

double parse_cpu(std::string_view field, std::size_t row)
{
    // from_chars for double is missing in older libstdc++; strtod on a copy.
    const std::string copy(field);
    char* end = nullptr;
    const double v = std::strtod(copy.c_str(), &end);
    if (copy.empty() || end != copy.c_str() + copy.size()) {
        throw InputError("trace row " + std::to_string(row) + ": bad cpu value '" + copy + "'");
    }
    if (!(v >= 0.0)) {
        throw InputError("trace row " + std::to_string(row) + ": negative cpu value " + copy);
    }
    return v;
}

} // namespace

DemandTrace read_trace_csv(std::istream& in)
{
    std::string line;
    std::size_t row = 1;
    if (!std::getline(in, line)) {
        throw InputError("trace is empty");
    }
    const auto header = split(line);
    if (header.size() != 3 || header[0] != "vm_id" || header[1] != "slot" || header[2] != "cpu") {
        throw InputError("trace header must be 'vm_id,slot,cpu'");
    }

    std::map<std::pair<std::size_t, std::size_t>, double> cells;
    std::size_t max_vm = 0;
    std::size_t max_slot = 0;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) {
            continue;
        }
        const auto f = split(line);
        if (f.size() != 3) {
            throw InputError("trace row " + std::to_string(row) + ": expected 3 fields");
        }
        const std::size_t vm = parse_index(f[0], row, "vm_id");
        const std::size_t slot = parse_index(f[1], row, "slot");
        const double cpu = parse_cpu(f[2], row);
        if (!cells.emplace(std::make_pair(slot, vm), cpu).second) {
            throw InputError("trace row " + std::to_string(row) + ": duplicate cell vm " +
                             std::to_string(vm) + " slot " + std::to_string(slot));
        }
        max_vm = std::max(max_vm, vm);
        max_slot = std::max(max_slot, slot);
    }
    if (cells.empty()) {
        throw InputError("trace has no data rows");
    }

    DemandTrace trace(max_vm + 1, max_slot + 1);
    if (cells.size() != trace.num_vms * trace.num_slots) {
        for (std::size_t t = 0; t < trace.num_slots; ++t) {
            for (std::size_t l = 0; l < trace.num_vms; ++l) {
                if (!cells.count({t, l})) {
                    throw InputError("trace is missing the cell for vm " + std::to_string(l) + " slot " +
                                     std::to_string(t));
                }
            }
        }
    }
    for (const auto& [key, cpu] : cells) {
        trace.at(key.second, key.first) = cpu;
    }
    trace.validate();
    return trace;
}

DemandTrace load_trace(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open trace file " + path.string());
    }
    return read_trace_csv(in);
}

void write_trace_csv(std::ostream& out, const DemandTrace& trace)
{
    trace.validate();
    out << "vm_id,slot,cpu\n";
    char buf[64];
    for (std::size_t t = 0; t < trace.num_slots; ++t) {
        for (std::size_t l = 0; l < trace.num_vms; ++l) {
            std::snprintf(buf, sizeof buf, "%zu,%zu,%.12f\n", l, t, trace.at(l, t));
            out << buf;
        }
    }
}

void save_trace(const std::filesystem::path& path, const DemandTrace& trace)
{
    std::ofstream out(path);
    if (!out) {
        throw InputError("cannot write trace file " + path.string());
    }
    write_trace_csv(out, trace);
}

std::string chain_to_json(const DemandChain& chain)
{
    return nlohmann::json(chain.rows()).dump();
}

DemandChain chain_from_json(const std::string& text)
{
    try {
        return DemandChain::from_rows(nlohmann::json::parse(text).get<std::vector<std::vector<double>>>());
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("bad chain JSON: ") + e.what());
    }
}

} // namespace madvm
