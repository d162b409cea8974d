#pragma once

#include <random>
#include <string>
#include <vector>

namespace whatif::test {

/// Random rule source text over the given identifiers. Mixes spacing,
/// redundant parentheses, negative literals and every operator.
class RuleGenerator {
public:
    RuleGenerator(std::vector<std::string> names, std::uint64_t seed) : names_(std::move(names)), rng_(seed) {}

    std::string boolean(int depth = 3) {
        const int pick = depth <= 0 ? 0 : static_cast<int>(rng_() % 5);
        switch (pick) {
            case 1: return boolean(depth - 1) + sp() + "and" + sp() + boolean(depth - 1);
            case 2: return boolean(depth - 1) + sp() + "or" + sp() + boolean(depth - 1);
            case 3: return "not " + maybe_paren(boolean(depth - 1));
            case 4: return "(" + boolean(depth - 1) + ")";
            default: break;
        }
        static const char* cmp[] = {"<", "<=", ">", ">=", "==", "!="};
        return arith(depth) + sp() + cmp[rng_() % 6] + sp() + arith(depth);
    }

    std::string arith(int depth) {
        const int pick = depth <= 0 ? static_cast<int>(rng_() % 2) : static_cast<int>(rng_() % 6);
        static const char* ops[] = {"+", "-", "*", "/"};
        switch (pick) {
            case 0: return names_[rng_() % names_.size()];
            case 1: return literal();
            case 2:
            case 3: return arith(depth - 1) + sp() + ops[rng_() % 4] + sp() + arith(depth - 1);
            case 4: return "-" + maybe_paren(arith(depth - 1));
            default: return "(" + arith(depth - 1) + ")";
        }
    }

private:
    std::string literal() {
        static const char* lits[] = {"0", "1", "2.5", "100", "0.001", "1e3", "3.25E-2", "64", "-7"};
        return lits[rng_() % 9];
    }
    std::string sp() { return rng_() % 3 == 0 ? "  " : " "; }
    std::string maybe_paren(const std::string& s) { return "(" + s + ")"; }

    std::vector<std::string> names_;
    std::mt19937_64 rng_;
};

}  // namespace whatif::test
