#pragma once

/**
 * @file transform.hpp
 * @brief Preprocessing passes and image building: sublabel replacement,
 *        software-mode trampoline rewriting, monitor interleaving and the
 *        chaotic placement of logical units into physical memory.
 *
 * The unit of permutation is the logical unit: 3 words in software mode
 * (instruction, kernel return, pad — the prototype's "single instruction"),
 * 1 word in hardware mode. The grid side n counts units, so an image holds
 * unit_words·n² word cells.
 */

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cmr/catmap.hpp"
#include "cmr/error.hpp"
#include "cmr/isa.hpp"
#include "cmr/rng.hpp"

namespace cmr::transform {

enum class Mode { Software, Hardware };

enum class SlotTag : std::uint8_t { App, KernelJump, Pad, Monitor, Foreign };

inline const char* tag_name(SlotTag t) {
    switch (t) {
        case SlotTag::App: return "APP";
        case SlotTag::KernelJump: return "KERNELJUMP";
        case SlotTag::Pad: return "PAD";
        case SlotTag::Monitor: return "MONITOR";
        case SlotTag::Foreign: return "FOREIGN";
    }
    return "?";
}

struct SlotCell {
    std::uint32_t word = 0;
    SlotTag tag = SlotTag::Pad;
    std::uint32_t logical_index = 0; // logical word index
};

struct MonitorEntry {
    std::uint16_t id = 0;
    std::uint32_t entry_unit = 0;
    std::uint32_t len_units = 3;
};

struct MemoryImage {
    Mode mode = Mode::Hardware;
    catmap::KeySet key; // key.n is the unit-grid side
    std::vector<SlotCell> slots; // physical order
    std::vector<MonitorEntry> monitor_table;
    std::map<std::string, std::uint32_t> label_table; // label -> logical unit

    std::uint32_t unit_words() const { return mode == Mode::Software ? 3 : 1; }
    std::uint32_t n() const { return key.n; }
    std::uint32_t unit_count() const { return key.n * key.n; }
    std::uint32_t total_words() const { return unit_count() * unit_words(); }
};

struct InterleaveConfig {
    std::uint32_t m = 0;
    std::uint32_t monitor_len = 3; // logical units per monitor body
    std::uint64_t seed = 0;        // monitor id assignment
    std::uint32_t grid_n = 0;      // when nonzero, capacity-check against n²
};

// ---------------------------------------------------------------------------
// Sublabel replacement
// ---------------------------------------------------------------------------

/// Numeric labels ("1:") and their Nb/Nf references become generated
/// full-frame labels (".S<k>"), reusing an existing full-frame label when the
/// target line already carries one.
inline isa::AsmProgram resolve_sublabels(const isa::AsmProgram& prog) {
    using isa::detail::is_label_name;
    using isa::detail::is_numeric_label;
    using isa::detail::is_sublabel_ref;

    isa::AsmProgram out = prog;
    int counter = 0;

    auto full_label_for = [&](std::size_t line_idx) -> std::string {
        for (const auto& l : out.lines[line_idx].labels)
            if (is_label_name(l)) return l;
        std::string fresh;
        do {
            fresh = ".S" + std::to_string(++counter);
        } while (out.label_index.count(fresh));
        out.lines[line_idx].labels.push_back(fresh);
        out.label_index[fresh] = line_idx;
        return fresh;
    };

    for (std::size_t i = 0; i < out.lines.size(); ++i) {
        const std::string& ref = out.lines[i].target;
        if (ref.empty() || !is_sublabel_ref(ref)) continue;
        const std::string digits = ref.substr(0, ref.size() - 1);
        const bool backward = ref.back() == 'b';
        std::optional<std::size_t> found;
        if (backward) {
            for (std::size_t j = i + 1; j-- > 0;) {
                for (const auto& l : out.lines[j].labels)
                    if (l == digits) { found = j; break; }
                if (found) break;
            }
        } else {
            for (std::size_t j = i + 1; j < out.lines.size() && !found; ++j)
                for (const auto& l : out.lines[j].labels)
                    if (l == digits) { found = j; break; }
        }
        if (!found)
            throw ParseError(out.lines[i].source_line,
                             "dangling sublabel reference '" + ref + "'");
        out.lines[i].target = full_label_for(*found);
    }

    for (auto& line : out.lines) {
        std::vector<std::string> kept;
        for (auto& l : line.labels)
            if (!is_numeric_label(l)) kept.push_back(std::move(l));
        line.labels = std::move(kept);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Software-mode rewriting
// ---------------------------------------------------------------------------

namespace detail {

inline isa::AsmLine make_line(isa::Instruction in, std::string target = {}) {
    isa::AsmLine line;
    line.instr = in;
    line.target = std::move(target);
    return line;
}

inline void emit_unit(std::vector<isa::AsmLine>& lines, isa::AsmLine first,
                      std::uint16_t kret_path) {
    lines.push_back(std::move(first));
    lines.push_back(make_line({isa::Opcode::KRET, 0, 0, kret_path}));
    lines.push_back(make_line({isa::Opcode::NOP, 0, 0, 0}));
}

// The paper's push-target-and-enter-kernel expansion: four units that leave
// (hi << 8) | lo of the target's unit index on the stack and take the jump
// entry. r14 is the rewrite scratch; pings save/restore it.
inline void emit_push_sequence(std::vector<isa::AsmLine>& lines,
                               const std::string& target,
                               std::uint16_t kernel_step,
                               std::uint16_t kernel_jump) {
    emit_unit(lines, make_line({isa::Opcode::LDI, isa::kScratchReg, 0, 0}, target),
              kernel_step);
    emit_unit(lines, make_line({isa::Opcode::PUSH, isa::kScratchReg, 0, 0}),
              kernel_step);
    emit_unit(lines, make_line({isa::Opcode::LDI, isa::kScratchReg, 0, 0}, target),
              kernel_step);
    lines.push_back(make_line({isa::Opcode::PUSH, isa::kScratchReg, 0, 0}));
    lines.push_back(make_line({isa::Opcode::KRET, 0, 0, kernel_jump}));
    lines.push_back(make_line({isa::Opcode::NOP, 0, 0, 0}));
}

} // namespace detail

/// Rewrites a resolved instruction stream into 3-word trampoline units.
/// Non-control instructions become [instr; KRET step; NOP]. JMP becomes the
/// four-unit push sequence. Conditional branches keep the branch in place,
/// retargeted at an out-of-line stub appended after the program body: the
/// fall-through path must reach VPC+1, so the stub cannot sit in line.
inline isa::AsmProgram rewrite_software_mode(
    const isa::AsmProgram& prog, std::uint16_t kernel_step = isa::kKernelStep,
    std::uint16_t kernel_jump = isa::kKernelJump) {
    using isa::Opcode;

    isa::AsmProgram out;
    out.unit_words = 3;

    struct StubRequest {
        std::size_t branch_line;   // line index of the Bcc in `out`
        std::string label;         // .X<k>
        std::string target;        // symbolic target, or
        std::optional<std::uint16_t> numeric_target; // original line index
    };
    std::vector<StubRequest> stubs;
    std::vector<std::uint32_t> line_to_unit(prog.lines.size(), 0);

    // Push-sequence LDI lines that need lo/hi of a resolved unit index.
    struct ImmPatch {
        std::size_t lo_line, hi_line;
        std::string target;
        std::optional<std::uint16_t> numeric_target;
    };
    std::vector<ImmPatch> patches;

    int stub_counter = 0;

    auto emit_jump_sequence = [&](const isa::AsmLine& src) {
        const std::size_t start = out.lines.size();
        detail::emit_push_sequence(out.lines, src.target, kernel_step,
                                   kernel_jump);
        ImmPatch patch;
        patch.lo_line = start;      // first LDI
        patch.hi_line = start + 6;  // second LDI
        patch.target = src.target;
        if (src.target.empty()) patch.numeric_target = src.instr.imm;
        patches.push_back(std::move(patch));
    };

    for (std::size_t i = 0; i < prog.lines.size(); ++i) {
        const isa::AsmLine& src = prog.lines[i];
        if (!src.target.empty() && isa::detail::is_sublabel_ref(src.target))
            throw Error("sublabels must be resolved before rewriting");

        line_to_unit[i] = static_cast<std::uint32_t>(out.lines.size() / 3);

        isa::AsmLine first;
        first.labels = src.labels;
        first.source_line = src.source_line;

        if (src.is_raw) {
            first.is_raw = true;
            first.raw_word = src.raw_word;
            detail::emit_unit(out.lines, std::move(first), kernel_step);
        } else if (src.instr.op == Opcode::JMP) {
            const std::size_t start = out.lines.size();
            emit_jump_sequence(src);
            out.lines[start].labels = src.labels;
            out.lines[start].source_line = src.source_line;
        } else if (src.instr.op == Opcode::BRNE || src.instr.op == Opcode::BREQ) {
            StubRequest req;
            req.branch_line = out.lines.size();
            do {
                req.label = ".X" + std::to_string(++stub_counter);
            } while (prog.label_index.count(req.label));
            req.target = src.target;
            if (src.target.empty()) req.numeric_target = src.instr.imm;
            first.instr = {src.instr.op, 0, 0, 0};
            first.target = req.label;
            detail::emit_unit(out.lines, std::move(first), kernel_step);
            stubs.push_back(std::move(req));
        } else {
            first.instr = src.instr;
            first.target.clear();
            detail::emit_unit(out.lines, std::move(first), kernel_step);
        }
    }

    // Out-of-line stubs, one push sequence each.
    for (auto& req : stubs) {
        const std::uint32_t stub_unit =
            static_cast<std::uint32_t>(out.lines.size() / 3);
        const std::size_t start = out.lines.size();
        detail::emit_push_sequence(out.lines, req.target, kernel_step,
                                   kernel_jump);
        out.lines[start].labels.push_back(req.label);
        ImmPatch patch;
        patch.lo_line = start;
        patch.hi_line = start + 6;
        patch.target = req.target;
        patch.numeric_target = req.numeric_target;
        patches.push_back(std::move(patch));
        out.lines[req.branch_line].instr.imm = static_cast<std::uint16_t>(stub_unit);
        out.lines[req.branch_line].target.clear();
        out.label_index[req.label] = start;
    }

    // Labels -> unit-start line indices.
    for (std::size_t i = 0; i < out.lines.size(); ++i)
        for (const auto& label : out.lines[i].labels)
            if (isa::detail::is_label_name(label)) out.label_index[label] = i;

    auto resolve_unit = [&](const ImmPatch& p) -> std::uint32_t {
        if (!p.target.empty()) {
            const auto it = out.label_index.find(p.target);
            if (it == out.label_index.end())
                throw Error("jump target '" + p.target + "' missing from label table");
            return static_cast<std::uint32_t>(it->second / 3);
        }
        if (*p.numeric_target >= line_to_unit.size())
            throw Error("numeric jump target out of range");
        return line_to_unit[*p.numeric_target];
    };

    for (const auto& p : patches) {
        const std::uint32_t unit = resolve_unit(p);
        out.lines[p.lo_line].instr.imm = static_cast<std::uint16_t>(unit & 0xFF);
        out.lines[p.lo_line].target.clear();
        out.lines[p.hi_line].instr.imm = static_cast<std::uint16_t>(unit >> 8);
        out.lines[p.hi_line].target.clear();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Monitor interleaving
// ---------------------------------------------------------------------------

/// Appends m monitor bodies (LDI r14,id / XOR r14,r15 / MON — one logical
/// unit per instruction) after the application, the paper's pre-randomization
/// stacking. Dispersion is the map's job, not the builder's. A monitor entry
/// at logical unit 0 would pin it to physical slot 0 (the map's fixed point),
/// so one pad unit is inserted first if that would happen.
inline std::pair<isa::AsmProgram, std::vector<MonitorEntry>> interleave_monitors(
    const isa::AsmProgram& prog, const InterleaveConfig& cfg) {
    isa::AsmProgram out = prog;
    std::vector<MonitorEntry> table;
    if (cfg.m == 0) return {out, table};
    if (cfg.monitor_len != 3)
        throw Error("monitor bodies are fixed at 3 logical units");

    const std::uint32_t uw = out.unit_words;
    auto emit_monitor_instr = [&](isa::Instruction in) {
        if (uw == 3) {
            detail::emit_unit(out.lines, detail::make_line(in), isa::kKernelStep);
        } else {
            out.lines.push_back(detail::make_line(in));
        }
    };

    if (out.lines.empty()) {
        // Shift rule: keep the first monitor entry off logical unit 0.
        emit_monitor_instr({isa::Opcode::NOP, 0, 0, 0});
    }

    std::mt19937_64 gen(cfg.seed);
    std::set<std::uint16_t> used;
    for (std::uint32_t i = 0; i < cfg.m; ++i) {
        std::uint16_t id;
        do {
            id = static_cast<std::uint16_t>(rng::draw(gen, 1, 0xFFFF));
        } while (!used.insert(id).second);

        MonitorEntry entry;
        entry.id = id;
        entry.entry_unit = static_cast<std::uint32_t>(out.lines.size() / uw);
        entry.len_units = 3;
        emit_monitor_instr({isa::Opcode::LDI, isa::kScratchReg, 0, id});
        emit_monitor_instr(
            {isa::Opcode::XOR, isa::kScratchReg, isa::kChallengeReg, 0});
        emit_monitor_instr({isa::Opcode::MON, 0, 0, 0});
        table.push_back(entry);
    }

    if (cfg.grid_n != 0) {
        const std::uint64_t units = out.lines.size() / uw;
        const std::uint64_t cap =
            static_cast<std::uint64_t>(cfg.grid_n) * cfg.grid_n;
        if (units > cap)
            throw CapacityError("application plus " + std::to_string(cfg.m) +
                                " monitors needs " + std::to_string(units) +
                                " units, grid holds " + std::to_string(cap));
    }
    return {out, table};
}

// ---------------------------------------------------------------------------
// Randomization
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint32_t assemble_word(const isa::AsmProgram& prog,
                                   const isa::AsmLine& line,
                                   std::uint32_t unit_words) {
    if (line.is_raw) return line.raw_word;
    if (!line.target.empty()) {
        const auto it = prog.label_index.find(line.target);
        if (it == prog.label_index.end())
            throw Error("jump target '" + line.target + "' missing from label table");
        isa::Instruction in = line.instr;
        in.imm = static_cast<std::uint16_t>(it->second / unit_words);
        return isa::encode(in);
    }
    return isa::encode(line.instr);
}

} // namespace detail

inline MemoryImage randomize(const isa::AsmProgram& prog,
                             const std::vector<MonitorEntry>& table,
                             const catmap::KeySet& key, Mode mode) {
    const std::uint32_t uw = mode == Mode::Software ? 3 : 1;
    if (prog.unit_words != uw)
        throw Error(mode == Mode::Software
                        ? "software images need a rewritten (3-word-unit) program"
                        : "hardware images take a plain instruction stream");
    if (!prog.lines.empty() && prog.lines.size() % uw != 0)
        throw Error("program is not a whole number of logical units");

    MemoryImage img;
    img.mode = mode;
    img.key = key;
    img.monitor_table = table;

    const std::uint64_t content_units = prog.lines.size() / uw;
    const std::uint64_t cap = static_cast<std::uint64_t>(key.n) * key.n;
    if (content_units > cap)
        throw CapacityError("program of " + std::to_string(content_units) +
                            " units exceeds grid capacity " + std::to_string(cap));

    for (const auto& [label, line_idx] : prog.label_index)
        img.label_table[label] = static_cast<std::uint32_t>(line_idx / uw);

    std::vector<std::pair<std::uint32_t, std::uint32_t>> monitor_ranges;
    for (const auto& m : table)
        monitor_ranges.emplace_back(m.entry_unit, m.entry_unit + m.len_units);
    auto in_monitor = [&](std::uint32_t unit) {
        for (const auto& [b, e] : monitor_ranges)
            if (unit >= b && unit < e) return true;
        return false;
    };

    const catmap::Permutation sigma = catmap::permute(key);
    img.slots.assign(cap * uw, {});
    const std::uint32_t nop = isa::encode({isa::Opcode::NOP, 0, 0, 0});

    for (std::uint32_t u = 0; u < cap; ++u) {
        const std::uint32_t phys_base = sigma[u] * uw;
        for (std::uint32_t j = 0; j < uw; ++j) {
            SlotCell cell;
            cell.logical_index = u * uw + j;
            if (u < content_units) {
                const isa::AsmLine& line = prog.lines[u * uw + j];
                cell.word = detail::assemble_word(prog, line, uw);
                if (uw == 3) {
                    cell.tag = j == 0 ? (in_monitor(u) ? SlotTag::Monitor
                                                       : SlotTag::App)
                               : j == 1 ? SlotTag::KernelJump
                                        : SlotTag::Pad;
                } else {
                    cell.tag = in_monitor(u) ? SlotTag::Monitor : SlotTag::App;
                }
            } else {
                cell.word = nop;
                cell.tag = SlotTag::Pad;
            }
            img.slots[phys_base + j] = cell;
        }
    }
    return img;
}

/// Recovers the logical-order program (content units only; fill pads drop).
inline isa::AsmProgram derandomize(const MemoryImage& img) {
    const std::uint32_t uw = img.unit_words();
    const catmap::Permutation inv = catmap::inverse_permute(img.key);

    std::vector<SlotCell> logical(img.slots.size());
    for (std::uint32_t p = 0; p < img.unit_count(); ++p) {
        const std::uint32_t u = inv[p];
        for (std::uint32_t j = 0; j < uw; ++j)
            logical[u * uw + j] = img.slots[p * uw + j];
    }

    // Content = everything up to the last non-fill unit. Monitor table
    // ranges always count as content.
    std::uint32_t content_units = 0;
    for (const auto& m : img.monitor_table)
        content_units = std::max(content_units, m.entry_unit + m.len_units);
    const std::uint32_t nop = isa::encode({isa::Opcode::NOP, 0, 0, 0});
    for (std::uint32_t u = img.unit_count(); u-- > content_units;) {
        bool fill = true;
        for (std::uint32_t j = 0; j < uw && fill; ++j) {
            const SlotCell& c = logical[u * uw + j];
            if (c.tag != SlotTag::Pad || c.word != nop) fill = false;
        }
        if (!fill) {
            content_units = u + 1;
            break;
        }
    }

    isa::AsmProgram prog;
    prog.unit_words = uw;
    for (std::uint32_t i = 0; i < content_units * uw; ++i) {
        isa::AsmLine line;
        const auto in = isa::decode(logical[i].word);
        if (in) {
            line.instr = *in;
        } else {
            line.is_raw = true;
            line.raw_word = logical[i].word;
        }
        prog.lines.push_back(std::move(line));
    }
    for (const auto& [label, unit] : img.label_table) {
        const std::size_t line_idx = static_cast<std::size_t>(unit) * uw;
        if (line_idx < prog.lines.size()) {
            prog.lines[line_idx].labels.push_back(label);
            prog.label_index[label] = line_idx;
        }
    }
    return prog;
}

// ---------------------------------------------------------------------------
// Dispersion metrics
// ---------------------------------------------------------------------------

struct HomogeneityReport {
    std::uint32_t max_gap = 0;  // longest circular run of slots with no monitor
    double mean_gap = 0.0;
    double chi_square = 0.0;    // occupancy over one bucket per monitor slot
};

inline HomogeneityReport homogeneity_report(const MemoryImage& img) {
    std::vector<std::uint32_t> positions;
    for (std::uint32_t p = 0; p < img.slots.size(); ++p)
        if (img.slots[p].tag == SlotTag::Monitor) positions.push_back(p);
    if (positions.empty())
        throw Error("homogeneity metrics are undefined without monitors");

    const std::uint32_t total = static_cast<std::uint32_t>(img.slots.size());
    HomogeneityReport rep;
    double gap_sum = 0.0;
    for (std::size_t i = 0; i < positions.size(); ++i) {
        const std::uint32_t cur = positions[i];
        const std::uint32_t next =
            i + 1 < positions.size() ? positions[i + 1] : positions[0] + total;
        const std::uint32_t gap = next - cur - 1;
        rep.max_gap = std::max(rep.max_gap, gap);
        gap_sum += gap;
    }
    rep.mean_gap = gap_sum / static_cast<double>(positions.size());

    // Chi-square of monitor counts over k equal buckets, k = monitor slots.
    const std::size_t buckets = positions.size();
    std::vector<std::uint32_t> observed(buckets, 0);
    for (const std::uint32_t p : positions)
        observed[static_cast<std::size_t>(
            static_cast<std::uint64_t>(p) * buckets / total)]++;
    const double expected = 1.0;
    for (const std::uint32_t o : observed) {
        const double d = o - expected;
        rep.chi_square += d * d / expected;
    }
    return rep;
}

} // namespace cmr::transform
