#pragma once

/**
 * @file isa.hpp
 * @brief Uniform-width instruction set, binary codec and line assembler.
 *
 * Every instruction is one 32-bit word: opcode(8) | rd(4) | rs(4) | imm(16).
 * Uniform width means one instruction per memory slot with no spacing
 * normalization needed before randomization.
 */

#include <array>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cmr/error.hpp"

namespace cmr::isa {

enum class Opcode : std::uint8_t {
    NOP = 0,
    HALT = 1,
    LDI = 2,
    MOV = 3,
    ADD = 4,
    SUB = 5,
    AND = 6,
    OR = 7,
    XOR = 8,
    CMP = 9,
    JMP = 10,
    BRNE = 11,
    BREQ = 12,
    PUSH = 13,
    POP = 14,
    OUT = 15,
    LD = 16,
    ST = 17,
    MON = 18,
    KRET = 19,
};

inline constexpr std::uint8_t kOpcodeCount = 20;
inline constexpr std::uint8_t kRegisterCount = 16;

// r14/r15 carry the watchdog challenge protocol (and double as the rewrite
// pass's scratch); user programs may not touch them.
inline constexpr std::uint8_t kScratchReg = 14;
inline constexpr std::uint8_t kChallengeReg = 15;

// KRET path selectors: the VM-native kernel's two entry points.
inline constexpr std::uint16_t kKernelStep = 0; // VPC = VPC + 1
inline constexpr std::uint16_t kKernelJump = 1; // pop target, set VPC

struct Instruction {
    Opcode op = Opcode::NOP;
    std::uint8_t rd = 0;
    std::uint8_t rs = 0;
    std::uint16_t imm = 0;

    bool operator==(const Instruction&) const = default;
};

enum class Operands { None, RdImm, RdRs, Rd, Rs, Target, Imm };

struct OpcodeInfo {
    std::string_view name;
    Operands operands;
};

inline constexpr std::array<OpcodeInfo, kOpcodeCount> kOpcodeTable{{
    {"NOP", Operands::None},    {"HALT", Operands::None},
    {"LDI", Operands::RdImm},   {"MOV", Operands::RdRs},
    {"ADD", Operands::RdRs},    {"SUB", Operands::RdRs},
    {"AND", Operands::RdRs},    {"OR", Operands::RdRs},
    {"XOR", Operands::RdRs},    {"CMP", Operands::RdRs},
    {"JMP", Operands::Target},  {"BRNE", Operands::Target},
    {"BREQ", Operands::Target}, {"PUSH", Operands::Rd},
    {"POP", Operands::Rd},      {"OUT", Operands::Rs},
    {"LD", Operands::RdImm},    {"ST", Operands::RdImm},
    {"MON", Operands::None},    {"KRET", Operands::Imm},
}};

inline std::uint32_t encode(const Instruction& in) {
    return (static_cast<std::uint32_t>(in.op) << 24) |
           (static_cast<std::uint32_t>(in.rd & 0xF) << 20) |
           (static_cast<std::uint32_t>(in.rs & 0xF) << 16) | in.imm;
}

/// Unknown opcode bytes yield nullopt: the IllegalInstruction marker.
/// Executing one is a fault, which is what makes foreign payloads visible.
inline std::optional<Instruction> decode(std::uint32_t word) {
    const std::uint8_t op = static_cast<std::uint8_t>(word >> 24);
    if (op >= kOpcodeCount) return std::nullopt;
    return Instruction{static_cast<Opcode>(op),
                       static_cast<std::uint8_t>((word >> 20) & 0xF),
                       static_cast<std::uint8_t>((word >> 16) & 0xF),
                       static_cast<std::uint16_t>(word & 0xFFFF)};
}

inline std::string disassemble(std::uint32_t word) {
    const std::optional<Instruction> in = decode(word);
    if (!in) {
        char buf[20];
        std::snprintf(buf, sizeof(buf), ".word 0x%08X", word);
        return buf;
    }
    const OpcodeInfo& info = kOpcodeTable[static_cast<std::uint8_t>(in->op)];
    std::string out{info.name};
    switch (info.operands) {
        case Operands::None: break;
        case Operands::RdImm:
            out += " r" + std::to_string(in->rd) + ", " + std::to_string(in->imm);
            break;
        case Operands::RdRs:
            out += " r" + std::to_string(in->rd) + ", r" + std::to_string(in->rs);
            break;
        case Operands::Rd: out += " r" + std::to_string(in->rd); break;
        case Operands::Rs: out += " r" + std::to_string(in->rs); break;
        case Operands::Target:
        case Operands::Imm: out += " " + std::to_string(in->imm); break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Assembly source
// ---------------------------------------------------------------------------

struct AsmLine {
    std::vector<std::string> labels; // includes numeric sublabels as digits
    Instruction instr;
    std::string target;   // symbolic branch target ("loop", ".L5", "1b");
                          // empty once resolved into instr.imm
    bool is_raw = false;  // .word directive
    std::uint32_t raw_word = 0;
    int source_line = 0;
};

struct AsmProgram {
    std::vector<AsmLine> lines;
    // Full-frame labels only; numeric sublabels stay per-line until the
    // transform pass replaces them.
    std::map<std::string, std::size_t> label_index;

    // Unit size in words once a rewrite pass has shaped the program
    // (1 = plain instruction stream, 3 = software-mode trampoline units).
    std::uint32_t unit_words = 1;
};

struct ParseOptions {
    bool allow_reserved_registers = false;
};

namespace detail {

inline std::string upper(std::string s) {
    for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

inline bool is_numeric_label(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    return true;
}

inline bool is_sublabel_ref(std::string_view s) {
    if (s.size() < 2) return false;
    const char tail = s.back();
    if (tail != 'b' && tail != 'f') return false;
    return is_numeric_label(s.substr(0, s.size() - 1));
}

inline bool is_label_name(std::string_view s) {
    if (s.empty()) return false;
    const char c0 = s.front();
    if (!(std::isalpha(static_cast<unsigned char>(c0)) || c0 == '_' || c0 == '.'))
        return false;
    for (char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'))
            return false;
    return true;
}

inline std::optional<Opcode> mnemonic(std::string_view word) {
    const std::string u = upper(std::string{word});
    for (std::uint8_t i = 0; i < kOpcodeCount; ++i)
        if (kOpcodeTable[i].name == u) return static_cast<Opcode>(i);
    return std::nullopt;
}

inline std::optional<std::uint8_t> parse_register(std::string_view tok) {
    if (tok.size() < 2 || (tok[0] != 'r' && tok[0] != 'R')) return std::nullopt;
    std::uint32_t v = 0;
    for (char c : tok.substr(1)) {
        if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
        v = v * 10 + static_cast<std::uint32_t>(c - '0');
        if (v >= kRegisterCount) return std::nullopt;
    }
    return static_cast<std::uint8_t>(v);
}

inline std::optional<std::uint32_t> parse_number(std::string_view tok) {
    if (tok.empty()) return std::nullopt;
    std::uint64_t v = 0;
    if (tok.size() > 2 && tok[0] == '0' && (tok[1] == 'x' || tok[1] == 'X')) {
        for (char c : tok.substr(2)) {
            const char u = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            std::uint64_t digit;
            if (u >= '0' && u <= '9') digit = static_cast<std::uint64_t>(u - '0');
            else if (u >= 'A' && u <= 'F') digit = static_cast<std::uint64_t>(u - 'A' + 10);
            else return std::nullopt;
            v = v * 16 + digit;
            if (v > 0xFFFFFFFFull) return std::nullopt;
        }
    } else {
        for (char c : tok) {
            if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
            v = v * 10 + static_cast<std::uint64_t>(c - '0');
            if (v > 0xFFFFFFFFull) return std::nullopt;
        }
    }
    return static_cast<std::uint32_t>(v);
}

inline std::vector<std::string> split_operands(std::string_view rest, int line_no) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : rest) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty() || !out.empty()) out.push_back(cur);
    for (auto& tok : out) {
        const auto b = tok.find_first_not_of(" \t");
        const auto e = tok.find_last_not_of(" \t");
        if (b == std::string::npos)
            throw ParseError(line_no, "empty operand");
        tok = tok.substr(b, e - b + 1);
    }
    return out;
}

} // namespace detail

/// Two passes: collect labels while parsing lines, then check every
/// full-frame reference resolves. Symbolic targets stay symbolic — the
/// transform stage turns them into logical indices.
inline AsmProgram parse_asm(std::string_view text,
                            const ParseOptions& opts = {}) {
    AsmProgram prog;
    std::vector<std::string> pending_labels;
    std::istringstream stream{std::string{text}};
    std::string raw_line;
    int line_no = 0;

    auto check_reg = [&](std::uint8_t r) {
        if (!opts.allow_reserved_registers &&
            (r == kScratchReg || r == kChallengeReg))
            throw ParseError(line_no, "register r" + std::to_string(r) +
                                          " is reserved for the watchdog protocol");
        return r;
    };

    while (std::getline(stream, raw_line)) {
        ++line_no;
        std::string_view sv{raw_line};
        if (const auto semi = sv.find(';'); semi != std::string_view::npos)
            sv = sv.substr(0, semi);

        // Peel leading "label:" prefixes (several may stack on one line).
        for (;;) {
            const auto b = sv.find_first_not_of(" \t");
            if (b == std::string_view::npos) { sv = {}; break; }
            sv = sv.substr(b);
            const auto colon = sv.find(':');
            if (colon == std::string_view::npos) break;
            const std::string_view candidate = sv.substr(0, colon);
            if (!(detail::is_label_name(candidate) ||
                  detail::is_numeric_label(candidate)))
                break;
            const std::string label{candidate};
            if (detail::is_label_name(candidate)) {
                if (prog.label_index.count(label))
                    throw ParseError(line_no, "duplicate label '" + label + "'");
                prog.label_index[label] = prog.lines.size();
            }
            pending_labels.push_back(label);
            sv = sv.substr(colon + 1);
        }
        if (sv.find_first_not_of(" \t") == std::string_view::npos) continue;

        AsmLine line;
        line.labels = std::move(pending_labels);
        pending_labels.clear();
        line.source_line = line_no;

        std::istringstream ls{std::string{sv}};
        std::string word;
        ls >> word;
        std::string rest;
        std::getline(ls, rest);

        if (word == ".word") {
            const auto b = rest.find_first_not_of(" \t");
            const auto e = rest.find_last_not_of(" \t");
            const auto v = b == std::string::npos
                               ? std::nullopt
                               : detail::parse_number(rest.substr(b, e - b + 1));
            if (!v) throw ParseError(line_no, "bad .word value");
            line.is_raw = true;
            line.raw_word = *v;
            prog.lines.push_back(std::move(line));
            continue;
        }

        const auto op = detail::mnemonic(word);
        if (!op) throw ParseError(line_no, "unknown mnemonic '" + word + "'");
        line.instr.op = *op;
        const Operands sig = kOpcodeTable[static_cast<std::uint8_t>(*op)].operands;

        std::vector<std::string> ops;
        if (rest.find_first_not_of(" \t") != std::string::npos)
            ops = detail::split_operands(rest, line_no);

        auto want = [&](std::size_t n) {
            if (ops.size() != n)
                throw ParseError(line_no, "'" + detail::upper(word) + "' expects " +
                                              std::to_string(n) + " operand(s)");
        };
        auto reg_or_throw = [&](const std::string& tok) {
            const auto r = detail::parse_register(tok);
            if (!r) throw ParseError(line_no, "bad register '" + tok + "'");
            return check_reg(*r);
        };
        auto imm_or_throw = [&](const std::string& tok) {
            const auto v = detail::parse_number(tok);
            if (!v || *v > 0xFFFF)
                throw ParseError(line_no, "immediate '" + tok + "' out of range");
            return static_cast<std::uint16_t>(*v);
        };

        switch (sig) {
            case Operands::None: want(0); break;
            case Operands::RdImm:
                want(2);
                line.instr.rd = reg_or_throw(ops[0]);
                line.instr.imm = imm_or_throw(ops[1]);
                break;
            case Operands::RdRs:
                want(2);
                line.instr.rd = reg_or_throw(ops[0]);
                line.instr.rs = reg_or_throw(ops[1]);
                break;
            case Operands::Rd:
                want(1);
                line.instr.rd = reg_or_throw(ops[0]);
                break;
            case Operands::Rs:
                want(1);
                line.instr.rs = reg_or_throw(ops[0]);
                break;
            case Operands::Imm:
                want(1);
                line.instr.imm = imm_or_throw(ops[0]);
                break;
            case Operands::Target: {
                want(1);
                const std::string& tok = ops[0];
                if (const auto v = detail::parse_number(tok)) {
                    if (*v > 0xFFFF)
                        throw ParseError(line_no, "target out of range");
                    line.instr.imm = static_cast<std::uint16_t>(*v);
                } else if (detail::is_sublabel_ref(tok) ||
                           detail::is_label_name(tok)) {
                    line.target = tok;
                } else {
                    throw ParseError(line_no, "bad branch target '" + tok + "'");
                }
                break;
            }
        }
        prog.lines.push_back(std::move(line));
    }

    if (!pending_labels.empty()) {
        // Trailing labels bind to an implicit end-of-program position.
        AsmLine line;
        line.labels = std::move(pending_labels);
        line.instr.op = Opcode::HALT;
        line.source_line = line_no;
        for (const auto& l : line.labels)
            if (detail::is_label_name(l)) prog.label_index[l] = prog.lines.size();
        prog.lines.push_back(std::move(line));
    }

    for (const auto& line : prog.lines) {
        if (line.target.empty() || detail::is_sublabel_ref(line.target)) continue;
        if (!prog.label_index.count(line.target))
            throw ParseError(line.source_line,
                             "undefined label '" + line.target + "'");
    }
    return prog;
}

} // namespace cmr::isa
