#include "cir/ad/var.hpp"

#include <unordered_set>

namespace cir::ad {

namespace {
thread_local bool g_no_grad = false;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Var Var::record(Tensor value, const char* op, std::vector<Var> parents, BackwardFn backward) {
  Var out;
  out.node_ = std::make_shared<Node>();
  out.node_->value = std::move(value);
  out.node_->op = op;
  if (g_no_grad) return out;

  bool any = false;
  for (const auto& p : parents) any = any || p.requires_grad();
  if (!any) return out;

  out.node_->requires_grad = true;
  out.node_->parents.reserve(parents.size());
  for (auto& p : parents) out.node_->parents.push_back(p.node_);
  out.node_->backward = std::move(backward);
  return out;
}

NoGradGuard::NoGradGuard() : previous_(g_no_grad) { g_no_grad = true; }
NoGradGuard::~NoGradGuard() { g_no_grad = previous_; }
bool NoGradGuard::active() { return g_no_grad; }

Tensor Gradients::of(const Var& param) const {
  auto it = grads_.find(param.node().get());
  if (it == grads_.end()) return Tensor(param.shape(), 0.0f);
  return it->second;
}

bool Gradients::contains(const Var& param) const { return grads_.count(param.node().get()) != 0; }

Gradients backward(const Var& loss) {
  if (!loss.valid() || loss.value().size() != 1) {
    throw std::logic_error("backward: loss must be a scalar, got shape " +
                           (loss.valid() ? shape_str(loss.shape()) : std::string("<null>")));
  }
  Gradients result;
  if (!loss.requires_grad()) return result;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  std::unordered_map<Node*, Tensor> grads;
  grads.emplace(loss.node().get(), Tensor(loss.shape(), 1.0f));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    auto g_it = grads.find(node);
    if (g_it == grads.end()) continue;
    if (node->parents.empty()) {
      result.set(node, std::move(g_it->second));
      grads.erase(g_it);
      continue;
    }
    std::vector<Tensor> slots(node->parents.size());
    for (std::size_t i = 0; i < node->parents.size(); ++i) {
      if (node->parents[i]->requires_grad) slots[i] = Tensor(node->parents[i]->value.shape(), 0.0f);
    }
    node->backward(g_it->second, slots);
    grads.erase(g_it);
    for (std::size_t i = 0; i < node->parents.size(); ++i) {
      Node* p = node->parents[i].get();
      if (!p->requires_grad) continue;
      auto [pit, inserted] = grads.try_emplace(p, std::move(slots[i]));
      if (!inserted) pit->second += slots[i];
    }
  }
  return result;
}

}  // namespace cir::ad
