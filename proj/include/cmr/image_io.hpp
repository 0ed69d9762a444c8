#pragma once

/**
 * @file image_io.hpp
 * @brief Line-oriented image file format, bit-exact and strictly parsed.
 *
 * ```
 * CMR1
 * MODE <SOFTWARE|HARDWARE>
 * N <n>
 * KEY <k> <p> <q>
 * MONITORS <m>
 * MON <id> <logical_entry> <len>      (× m)
 * LABEL <name> <logical_index>        (× count)
 * SLOTS <word count>
 * <physical_index> <8-hex-digit word> <tag> <logical_index>
 * ```
 * The word count is unit_words·n²: n² in hardware mode, 3n² in software
 * mode (three words per logical unit).
 */

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "cmr/error.hpp"
#include "cmr/transform.hpp"

namespace cmr::transform {

inline void write_image(std::ostream& out, const MemoryImage& img) {
    out << "CMR1\n";
    out << "MODE " << (img.mode == Mode::Software ? "SOFTWARE" : "HARDWARE")
        << "\n";
    out << "N " << img.key.n << "\n";
    out << "KEY " << img.key.k << " " << img.key.p << " " << img.key.q << "\n";
    out << "MONITORS " << img.monitor_table.size() << "\n";
    for (const auto& m : img.monitor_table)
        out << "MON " << m.id << " " << m.entry_unit << " " << m.len_units
            << "\n";
    for (const auto& [label, unit] : img.label_table)
        out << "LABEL " << label << " " << unit << "\n";
    out << "SLOTS " << img.slots.size() << "\n";
    char hex[9];
    for (std::size_t p = 0; p < img.slots.size(); ++p) {
        const SlotCell& c = img.slots[p];
        std::snprintf(hex, sizeof(hex), "%08X", c.word);
        out << p << " " << hex << " " << tag_name(c.tag) << " "
            << c.logical_index << "\n";
    }
}

inline std::string image_to_string(const MemoryImage& img) {
    std::ostringstream os;
    write_image(os, img);
    return os.str();
}

namespace detail {

inline SlotTag tag_from_name(const std::string& s, int line) {
    if (s == "APP") return SlotTag::App;
    if (s == "KERNELJUMP") return SlotTag::KernelJump;
    if (s == "PAD") return SlotTag::Pad;
    if (s == "MONITOR") return SlotTag::Monitor;
    if (s == "FOREIGN") return SlotTag::Foreign;
    throw ParseError(line, "unknown slot tag '" + s + "'");
}

inline std::string next_line(std::istream& in, int& line_no) {
    std::string line;
    if (!std::getline(in, line))
        throw ParseError(line_no, "unexpected end of image file");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

} // namespace detail

inline MemoryImage read_image(std::istream& in) {
    int line_no = 0;
    MemoryImage img;

    if (detail::next_line(in, line_no) != "CMR1")
        throw ParseError(line_no, "missing CMR1 magic");

    {
        std::istringstream ls(detail::next_line(in, line_no));
        std::string key, value;
        if (!(ls >> key >> value) || key != "MODE" ||
            (value != "SOFTWARE" && value != "HARDWARE"))
            throw ParseError(line_no, "expected MODE SOFTWARE|HARDWARE");
        img.mode = value == "SOFTWARE" ? Mode::Software : Mode::Hardware;
    }
    {
        std::istringstream ls(detail::next_line(in, line_no));
        std::string key;
        if (!(ls >> key >> img.key.n) || key != "N" || img.key.n < 1)
            throw ParseError(line_no, "expected N <n>");
    }
    {
        std::istringstream ls(detail::next_line(in, line_no));
        std::string key;
        if (!(ls >> key >> img.key.k >> img.key.p >> img.key.q) || key != "KEY")
            throw ParseError(line_no, "expected KEY <k> <p> <q>");
    }

    std::size_t monitor_count = 0;
    {
        std::istringstream ls(detail::next_line(in, line_no));
        std::string key;
        if (!(ls >> key >> monitor_count) || key != "MONITORS")
            throw ParseError(line_no, "expected MONITORS <m>");
    }
    for (std::size_t i = 0; i < monitor_count; ++i) {
        std::istringstream ls(detail::next_line(in, line_no));
        std::string key;
        MonitorEntry m;
        if (!(ls >> key >> m.id >> m.entry_unit >> m.len_units) || key != "MON")
            throw ParseError(line_no, "expected MON <id> <entry> <len>");
        img.monitor_table.push_back(m);
    }

    std::size_t slot_count = 0;
    for (;;) {
        const std::string raw = detail::next_line(in, line_no);
        std::istringstream ls(raw);
        std::string key;
        ls >> key;
        if (key == "LABEL") {
            std::string name;
            std::uint32_t unit;
            if (!(ls >> name >> unit))
                throw ParseError(line_no, "expected LABEL <name> <index>");
            img.label_table[name] = unit;
        } else if (key == "SLOTS") {
            if (!(ls >> slot_count))
                throw ParseError(line_no, "expected SLOTS <count>");
            break;
        } else {
            throw ParseError(line_no, "unknown header line '" + key + "'");
        }
    }

    if (slot_count != img.total_words())
        throw ParseError(line_no,
                         "SLOTS count " + std::to_string(slot_count) +
                             " does not match mode/grid (want " +
                             std::to_string(img.total_words()) + ")");

    img.slots.assign(slot_count, {});
    std::vector<bool> seen(slot_count, false);
    for (std::size_t i = 0; i < slot_count; ++i) {
        std::istringstream ls(detail::next_line(in, line_no));
        std::size_t phys;
        std::string hex, tag;
        std::uint32_t logical;
        if (!(ls >> phys >> hex >> tag >> logical) || hex.size() != 8)
            throw ParseError(line_no, "bad slot line");
        if (phys >= slot_count || seen[phys])
            throw ParseError(line_no, "bad or repeated physical index");
        seen[phys] = true;
        std::uint32_t word = 0;
        for (char c : hex) {
            word <<= 4;
            if (c >= '0' && c <= '9') word |= static_cast<std::uint32_t>(c - '0');
            else if (c >= 'A' && c <= 'F')
                word |= static_cast<std::uint32_t>(c - 'A' + 10);
            else if (c >= 'a' && c <= 'f')
                word |= static_cast<std::uint32_t>(c - 'a' + 10);
            else
                throw ParseError(line_no, "bad hex word");
        }
        img.slots[phys] = {word, detail::tag_from_name(tag, line_no), logical};
    }

    std::string trailing;
    while (std::getline(in, trailing)) {
        ++line_no;
        if (!trailing.empty() && trailing.back() == '\r') trailing.pop_back();
        if (!trailing.empty())
            throw ParseError(line_no, "trailing content after slot table");
    }
    return img;
}

inline MemoryImage read_image_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open image file '" + path + "'");
    return read_image(in);
}

inline void write_image_file(const std::string& path, const MemoryImage& img) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write image file '" + path + "'");
    write_image(out, img);
}

} // namespace cmr::transform
