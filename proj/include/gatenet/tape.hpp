#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "gatenet/common.hpp"
#include "gatenet/tensor.hpp"

namespace gatenet {

template <typename T>
class Tape;

// Lightweight handle to a tape node.
template <typename T>
struct Var {
    Tape<T>* tape = nullptr;
    int id = -1;

    bool valid() const { return tape != nullptr && id >= 0; }
    const Tensor4<T>& value() const { return tape->value(*this); }
    const Shape4& shape() const { return value().shape(); }
};

// Reverse-mode tape. Nodes are appended in evaluation order, so parents
// always precede children and one reverse sweep is a valid backward pass.
// Single-writer: one forward/backward pair at a time per tape.
template <typename T>
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, int)>;

    Var<T> leaf(Tensor4<T> value, bool requires_grad) {
        return push(std::move(value), {}, requires_grad ? "param" : "const", nullptr,
                    requires_grad);
    }

    Var<T> push(Tensor4<T> value, std::vector<int> parents, const char* op,
                BackwardFn backward, bool leaf_requires_grad = false) {
        bool needs = leaf_requires_grad;
        for (int p : parents) needs = needs || nodes_[p].needs_grad;
        Node n;
        n.value = std::move(value);
        n.parents = std::move(parents);
        n.op = op;
        n.backward = std::move(backward);
        n.needs_grad = needs;
        nodes_.push_back(std::move(n));
        return Var<T>{this, static_cast<int>(nodes_.size()) - 1};
    }

    const Tensor4<T>& value(Var<T> v) const { return nodes_.at(check(v)).value; }

    // Gradient of the last backward() seed w.r.t. this node. Zero tensor for
    // nodes the sweep never touched (disconnected from the loss).
    const Tensor4<T>& grad(Var<T> v) {
        Node& n = nodes_.at(check(v));
        ensure_grad(n);
        return n.grad;
    }

    Tensor4<T>& grad_mut(int id) {
        Node& n = nodes_.at(static_cast<std::size_t>(id));
        ensure_grad(n);
        return n.grad;
    }

    void zero_grad() {
        for (Node& n : nodes_)
            if (!n.grad.empty()) n.grad.zero();
    }

    // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. The seed
    // must be a single element.
    void backward(Var<T> loss) {
        const int lid = check(loss);
        Node& ln = nodes_[lid];
        require(ln.value.size() == 1, "backward: seed node must be scalar, got shape ",
                ln.value.shape().str());
        ensure_grad(ln);
        ln.grad.data()[0] += T(1);

        std::vector<char> reachable(nodes_.size(), 0);
        reachable[lid] = 1;
        for (int id = lid; id >= 0; --id) {
            Node& n = nodes_[static_cast<std::size_t>(id)];
            if (!reachable[id] || !n.needs_grad) continue;
            for (int p : n.parents) reachable[p] = 1;
            if (n.backward) n.backward(*this, id);
        }
    }

    std::size_t size() const { return nodes_.size(); }
    const std::vector<int>& parents(Var<T> v) const { return nodes_.at(check(v)).parents; }
    const char* op_name(Var<T> v) const { return nodes_.at(check(v)).op; }

    bool needs(int id) const { return nodes_.at(static_cast<std::size_t>(id)).needs_grad; }
    const Tensor4<T>& value_at(int id) const {
        return nodes_.at(static_cast<std::size_t>(id)).value;
    }

private:
    struct Node {
        Tensor4<T> value;
        Tensor4<T> grad;  // allocated on first use
        std::vector<int> parents;
        const char* op = "";
        BackwardFn backward;
        bool needs_grad = false;
    };

    std::size_t check(Var<T> v) const {
        require(v.tape == this && v.id >= 0 && v.id < static_cast<int>(nodes_.size()),
                "Tape: variable does not belong to this tape");
        return static_cast<std::size_t>(v.id);
    }

    void ensure_grad(Node& n) {
        if (n.grad.empty() && n.value.size() > 0) n.grad = Tensor4<T>(n.value.shape());
    }

    std::vector<Node> nodes_;
};

}  // namespace gatenet
