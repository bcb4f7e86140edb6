#include "fpt/heads.hpp"

#include <stdexcept>

namespace fpt {

int TaskSpec::output_dim() const {
    switch (kind) {
        case Kind::long_forecast:
        case Kind::short_forecast: return horizon;
        case Kind::imputation:
        case Kind::anomaly: return context_len;
        case Kind::classification: return num_classes;
    }
    throw std::logic_error("unreachable");
}

void TaskSpec::validate() const {
    if (context_len < 2) throw std::invalid_argument("task: context_len must be >= 2");
    if (is_forecast() && horizon < 1)
        throw std::invalid_argument("task: forecasting horizon must be > 0");
    if (kind == Kind::classification && num_classes < 2)
        throw std::invalid_argument("task: classification needs >= 2 classes");
    if (kind == Kind::imputation && !(mask_ratio > 0.0 && mask_ratio < 1.0))
        throw std::invalid_argument("task: imputation mask_ratio must lie in (0,1)");
}

TaskSpec::Kind task_kind_from_string(const std::string& s) {
    if (s == "long_forecast") return TaskSpec::Kind::long_forecast;
    if (s == "short_forecast") return TaskSpec::Kind::short_forecast;
    if (s == "imputation") return TaskSpec::Kind::imputation;
    if (s == "classification") return TaskSpec::Kind::classification;
    if (s == "anomaly") return TaskSpec::Kind::anomaly;
    throw std::invalid_argument("unknown task kind '" + s + "'");
}

std::string task_kind_to_string(TaskSpec::Kind k) {
    switch (k) {
        case TaskSpec::Kind::long_forecast: return "long_forecast";
        case TaskSpec::Kind::short_forecast: return "short_forecast";
        case TaskSpec::Kind::imputation: return "imputation";
        case TaskSpec::Kind::classification: return "classification";
        case TaskSpec::Kind::anomaly: return "anomaly";
    }
    throw std::logic_error("unreachable");
}

Head Head::init(int in_dim, int out_dim, std::uint64_t seed) {
    if (in_dim < 1 || out_dim < 1) throw std::invalid_argument("head: bad dimensions");
    std::mt19937_64 rng(seed);
    Head h;
    h.w = Tensor::randn({in_dim, out_dim}, rng, 0.02, true);
    h.b = Tensor::zeros({out_dim});
    h.b->requires_grad = true;
    h.registry.push_back({"head.w", h.w, true});
    h.registry.push_back({"head.b", h.b, true});
    return h;
}

TensorPtr head_forward(Graph& g, const Head& head, const TensorPtr& tokens, int group) {
    if (tokens->shape.size() != 3)
        throw std::invalid_argument("head_forward: tokens must be [B, N, D]");
    const int rows = tokens->shape[0];
    const int n = tokens->shape[1];
    const int d = tokens->shape[2];
    if (group < 1 || rows % group != 0)
        throw std::invalid_argument("head_forward: batch not divisible by group");
    auto flat = g.reshape(tokens, {rows / group, group * n * d});
    return g.add(g.matmul(flat, head.w), head.b);
}

TensorPtr mse_loss(Graph& g, const TensorPtr& pred, const TensorPtr& target) {
    if (pred->shape != target->shape)
        throw std::invalid_argument("mse_loss: shapes disagree: " + shape_str(pred->shape) +
                                    " vs " + shape_str(target->shape));
    auto diff = g.sub(pred, target);
    return g.mean(g.mul(diff, diff));
}

TensorPtr masked_mse_loss(Graph& g, const TensorPtr& pred, const TensorPtr& target,
                          const TensorPtr& mask) {
    if (pred->shape != target->shape || pred->shape != mask->shape)
        throw std::invalid_argument("masked_mse_loss: shapes disagree");
    double count = 0.0;
    for (double v : mask->value) count += (v == 0.0) ? 1.0 : 0.0;
    if (count == 0.0)
        throw std::invalid_argument("masked_mse_loss: mask has no masked positions");
    auto hole = g.affine(Graph::detach(mask), -1.0, 1.0);  // 1 at masked positions
    auto diff = g.sub(pred, target);
    auto sq = g.mul(g.mul(diff, diff), hole);
    return g.scale(g.sum(sq), 1.0 / count);
}

int argmax_class(const std::vector<double>& logits) {
    int best = 0;
    for (std::size_t j = 1; j < logits.size(); ++j)
        if (logits[j] > logits[best]) best = static_cast<int>(j);
    return best;
}

}  // namespace fpt
