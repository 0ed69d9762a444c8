#include <catch_amalgamated.hpp>
#include <random>

#include "cmr/isa.hpp"

using namespace cmr::isa;

TEST_CASE("frozen encodings") {
    CHECK(encode({Opcode::NOP, 0, 0, 0}) == 0x00000000u);
    CHECK(encode({Opcode::HALT, 0, 0, 0}) == 0x01000000u);
    CHECK(encode({Opcode::LDI, 1, 0, 5}) == 0x02100005u);
}

TEST_CASE("decode of unknown opcode is the illegal marker") {
    CHECK(decode(0x00000000u)->op == Opcode::NOP);
    CHECK(!decode(0xFF000000u).has_value());
    CHECK(!decode(0x14000000u).has_value()); // opcode 20, first unassigned
}

TEST_CASE("decode(encode(i)) round-trips the instruction space") {
    // Every opcode × register corner × sampled immediates.
    const std::uint16_t imms[] = {0, 1, 5, 255, 256, 0x7FFF, 0x8000, 0xFFFF};
    for (std::uint8_t op = 0; op < kOpcodeCount; ++op) {
        for (std::uint8_t rd : {0, 1, 7, 15}) {
            for (std::uint8_t rs : {0, 3, 15}) {
                for (std::uint16_t imm : imms) {
                    const Instruction in{static_cast<Opcode>(op), rd, rs, imm};
                    const auto back = decode(encode(in));
                    REQUIRE(back.has_value());
                    CHECK(*back == in);
                }
            }
        }
    }
}

TEST_CASE("disassembly of the spec examples") {
    CHECK(disassemble(0x00000000u) == "NOP");
    CHECK(disassemble(encode({Opcode::LDI, 1, 0, 5})) == "LDI r1, 5");
    CHECK(disassemble(0xFF000000u) == ".word 0xFF000000");
}

TEST_CASE("parse(disassemble(w)) re-encodes to w for canonical words") {
    std::mt19937_64 rng(17);
    ParseOptions allow{.allow_reserved_registers = true};
    for (int trial = 0; trial < 400; ++trial) {
        Instruction in;
        in.op = static_cast<Opcode>(rng() % kOpcodeCount);
        const Operands sig = kOpcodeTable[static_cast<std::uint8_t>(in.op)].operands;
        switch (sig) {
            case Operands::None: break;
            case Operands::RdImm:
                in.rd = rng() % 16;
                in.imm = static_cast<std::uint16_t>(rng());
                break;
            case Operands::RdRs:
                in.rd = rng() % 16;
                in.rs = rng() % 16;
                break;
            case Operands::Rd: in.rd = rng() % 16; break;
            case Operands::Rs: in.rs = rng() % 16; break;
            case Operands::Target:
            case Operands::Imm: in.imm = static_cast<std::uint16_t>(rng()); break;
        }
        const std::uint32_t word = encode(in);
        const AsmProgram prog = parse_asm(disassemble(word), allow);
        REQUIRE(prog.lines.size() == 1);
        CHECK(encode(prog.lines[0].instr) == word);
    }
}

TEST_CASE("parse_asm structures a small program") {
    const AsmProgram prog = parse_asm("LDI r1, 5\nOUT r1\nHALT");
    REQUIRE(prog.lines.size() == 3);
    CHECK(prog.label_index.empty());
    CHECK(prog.lines[0].instr.op == Opcode::LDI);
    CHECK(prog.lines[1].instr.op == Opcode::OUT);
    CHECK(prog.lines[1].instr.rs == 1);
    CHECK(prog.lines[2].instr.op == Opcode::HALT);
}

TEST_CASE("labels resolve to line indices") {
    const AsmProgram prog = parse_asm("loop: SUB r1, r2\nBRNE loop");
    REQUIRE(prog.label_index.count("loop"));
    CHECK(prog.label_index.at("loop") == 0);
    CHECK(prog.lines[1].target == "loop");
}

TEST_CASE("reserved registers are rejected in user programs") {
    CHECK_THROWS_AS(parse_asm("LDI r14, 1"), cmr::ParseError);
    CHECK_THROWS_AS(parse_asm("OUT r15"), cmr::ParseError);
    CHECK_NOTHROW(parse_asm("LDI r14, 1", {.allow_reserved_registers = true}));
}

TEST_CASE("parse errors carry line numbers") {
    try {
        parse_asm("NOP\nFROB r1\nHALT");
        FAIL("expected ParseError");
    } catch (const cmr::ParseError& e) {
        CHECK(e.line == 2);
    }
}

TEST_CASE("duplicate and undefined labels are rejected") {
    CHECK_THROWS_AS(parse_asm("a: NOP\na: HALT"), cmr::ParseError);
    CHECK_THROWS_AS(parse_asm("JMP nowhere\nHALT"), cmr::ParseError);
}

TEST_CASE("numeric sublabels parse and may repeat") {
    const AsmProgram prog =
        parse_asm("1: SUB r1, r2\nBRNE 1b\n1: NOP\nBRNE 1f\n1: HALT");
    CHECK(prog.lines[0].labels == std::vector<std::string>{"1"});
    CHECK(prog.lines[1].target == "1b");
    CHECK(prog.lines[3].target == "1f");
}

TEST_CASE("comments and blank lines are ignored") {
    const AsmProgram prog =
        parse_asm("; header\n\n  NOP ; trailing\n\t\nHALT");
    CHECK(prog.lines.size() == 2);
}

TEST_CASE(".word directives round-trip raw cells") {
    const AsmProgram prog = parse_asm(".word 0xFF000000");
    REQUIRE(prog.lines.size() == 1);
    CHECK(prog.lines[0].is_raw);
    CHECK(prog.lines[0].raw_word == 0xFF000000u);
}

TEST_CASE("operand arity and range errors") {
    CHECK_THROWS_AS(parse_asm("LDI r1"), cmr::ParseError);
    CHECK_THROWS_AS(parse_asm("NOP r1"), cmr::ParseError);
    CHECK_THROWS_AS(parse_asm("LDI r1, 65536"), cmr::ParseError);
    CHECK_THROWS_AS(parse_asm("MOV r1, 5"), cmr::ParseError);
    CHECK_THROWS_AS(parse_asm("LDI r16, 0"), cmr::ParseError);
}
