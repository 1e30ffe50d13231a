#pragma once

#include <bit>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace bailout {

// Set of node indices (0-based) backed by a 64-bit mask. Networks are capped
// at 64 institutions, which covers every data set this project handles.
class NodeSet {
public:
    static constexpr int kCapacity = 64;

    constexpr NodeSet() = default;
    constexpr explicit NodeSet(std::uint64_t mask) : mask_(mask) {}
    NodeSet(std::initializer_list<int> ids) {
        for (int id : ids) insert(id);
    }

    static NodeSet all(int n) {
        check(n == 0 ? 0 : n - 1);
        return NodeSet(n == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << n) - 1));
    }

    bool contains(int id) const { return id >= 0 && id < kCapacity && ((mask_ >> id) & 1U); }
    void insert(int id) {
        check(id);
        mask_ |= std::uint64_t{1} << id;
    }
    void erase(int id) {
        check(id);
        mask_ &= ~(std::uint64_t{1} << id);
    }

    int size() const { return std::popcount(mask_); }
    bool empty() const { return mask_ == 0; }
    std::uint64_t mask() const { return mask_; }

    NodeSet operator|(NodeSet o) const { return NodeSet(mask_ | o.mask_); }
    NodeSet operator&(NodeSet o) const { return NodeSet(mask_ & o.mask_); }
    NodeSet minus(NodeSet o) const { return NodeSet(mask_ & ~o.mask_); }
    bool is_subset_of(NodeSet o) const { return (mask_ & ~o.mask_) == 0; }
    bool operator==(const NodeSet&) const = default;
    auto operator<=>(const NodeSet&) const = default;

    // Ascending member ids.
    std::vector<int> ids() const {
        std::vector<int> out;
        out.reserve(static_cast<std::size_t>(size()));
        for (std::uint64_t m = mask_; m != 0; m &= m - 1) out.push_back(std::countr_zero(m));
        return out;
    }

    // Human-readable, 1-based: "{1,4,10}".
    std::string to_string() const {
        std::string s = "{";
        bool first = true;
        for (int id : ids()) {
            if (!first) s += ",";
            s += std::to_string(id + 1);
            first = false;
        }
        return s + "}";
    }

private:
    static void check(int id) {
        if (id < 0 || id >= kCapacity) throw std::out_of_range("NodeSet index out of range: " + std::to_string(id));
    }

    std::uint64_t mask_ = 0;
};

}  // namespace bailout
