#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "taskmoe/tasks.hpp"
#include "taskmoe/tensor.hpp"

namespace taskmoe {

/// How the two selected gate values are formed from the router logits.
/// RenormTop2 takes a softmax over just the selected logits, so gates sum
/// to 1 exactly; FullSoftmax keeps the probabilities of the selected
/// experts under the full softmax (sum <= 1). RenormTop2 is the default
/// and the mode the extraction-equivalence guarantees are stated for.
enum class GateMode { RenormTop2, FullSoftmax };

std::string to_string(GateMode m);
GateMode gate_mode_from_string(const std::string& s);

struct MoeConfig {
    int d_model = 64;
    int d_ff = 256;
    int n_heads = 2;
    int n_layers = 2;  // per side
    int n_experts = 8;
    int top_k = 2;
    int vocab_size = 0;  // filled from the vocabulary when 0
    int max_len = 64;
    bool moe_every_layer = true;  // otherwise only the last layer per side
    int d_task = 32;
    GateMode gate_mode = GateMode::RenormTop2;
    double balance_coeff = 0.0;  // optional expert-importance balancing term

    void validate() const;
    bool layer_is_moe(int layer) const { return moe_every_layer || layer == n_layers - 1; }

    /// The production-scale configuration the toy defaults miniaturize.
    static MoeConfig paper_preset(int n_experts);
};

enum class Side { Encoder, Decoder };
std::string to_string(Side s);

/// The routed experts and gate weights for one (task, layer, side).
struct RoutingDecision {
    TaskId task = 0;
    int layer = 0;
    Side side = Side::Encoder;
    std::vector<int> experts;   // top_k entries, distinct
    std::vector<double> gates;  // nonnegative; sums to 1 under RenormTop2

    bool same_expert_set(const RoutingDecision& other) const;
};

struct FfnExpert {
    Tensor w1, b1, w2, b2;
};

struct ExpertBank {
    std::vector<FfnExpert> experts;
};

struct RouterParams {
    Tensor task_emb;  // [n_tasks × d_task]
    Tensor proj_w;    // [d_task × n_experts]
    Tensor proj_b;    // [n_experts]
};

struct AttentionParams {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};

struct LayerNormParams {
    Tensor gain, bias;
};

struct EncoderLayer {
    AttentionParams self_attn;
    LayerNormParams ln_attn, ln_ffn;
    ExpertBank bank;
    std::optional<RouterParams> router;  // absent when the layer is dense
};

struct DecoderLayer {
    AttentionParams self_attn, cross_attn;
    LayerNormParams ln_self, ln_cross, ln_ffn;
    ExpertBank bank;
    std::optional<RouterParams> router;
};

/// Routing decisions recorded during a forward pass, one entry per
/// (sequence, MoE layer, side).
struct RoutingTrace {
    struct Entry {
        int sequence;
        RoutingDecision decision;
    };
    std::vector<Entry> entries;
};

class DenseModel;

/// Encoder-decoder transformer whose feed-forward sublayers are expert
/// banks selected by a per-(layer, side) task-conditioned top-k router.
/// Routing depends only on the sequence's TaskId, never on token content.
class MoeModel {
  public:
    MoeModel() = default;
    MoeModel(const MoeConfig& cfg, const TaskRegistry& registry, std::uint64_t seed);

    const MoeConfig& config() const { return cfg_; }
    const TaskRegistry& registry() const { return reg_; }

    /// Pure function of parameters and task; tie on logits resolves to the
    /// lower expert index.
    RoutingDecision route(int layer, Side side, TaskId task) const;

    /// Per-sequence logits, [tgt_len × vocab] each. Trailing pad tokens are
    /// dropped before processing; one task id per sequence.
    std::vector<Tensor> forward(const std::vector<std::vector<int>>& src_batch,
                                const std::vector<std::vector<int>>& tgt_in_batch,
                                const std::vector<TaskId>& tasks,
                                RoutingTrace* trace = nullptr) const;

    Tensor encode(const std::vector<int>& src_ids, TaskId task, int seq_index = 0,
                  RoutingTrace* trace = nullptr) const;
    Tensor decode_logits(const Tensor& enc_out, const std::vector<int>& tgt_in_ids, TaskId task,
                         int seq_index = 0, RoutingTrace* trace = nullptr) const;

    /// Importance-balancing penalty over the batch's routed gates; zero
    /// tensor when balance_coeff is 0. Added to the training loss.
    Tensor balance_penalty(const std::vector<TaskId>& tasks) const;

    DenseModel extract_dense(TaskId task) const;

    std::vector<std::pair<std::string, Tensor>> named_params() const;
    long long actual_param_count() const;
    void zero_grad() const;

  private:
    friend class DenseModel;
    MoeConfig cfg_;
    TaskRegistry reg_;
    Tensor tok_emb_;  // [vocab × d_model], shared by encoder and decoder
    Tensor out_w_, out_b_;
    LayerNormParams enc_final_, dec_final_;
    std::vector<EncoderLayer> enc_;
    std::vector<DecoderLayer> dec_;
    std::vector<double> pos_enc_;  // sinusoidal, [max_len × d_model], not a parameter

    Tensor embed(const std::vector<int>& ids) const;
    Tensor moe_ffn(const Tensor& x, const ExpertBank& bank,
                   const std::optional<RouterParams>& router, int layer, Side side, TaskId task,
                   int seq_index, RoutingTrace* trace) const;
};

/// A router-free sub-network materialized from one task's routing: each MoE
/// layer keeps only the routed experts with their gates frozen. Its forward
/// matches the parent MoE forward for that task bit for bit.
class DenseModel {
  public:
    DenseModel() = default;

    const MoeConfig& config() const { return cfg_; }
    const std::string& origin_task_key() const { return origin_task_key_; }
    const std::vector<RoutingDecision>& frozen_routing() const { return frozen_; }

    std::vector<Tensor> forward(const std::vector<std::vector<int>>& src_batch,
                                const std::vector<std::vector<int>>& tgt_in_batch) const;
    Tensor encode(const std::vector<int>& src_ids) const;
    Tensor decode_logits(const Tensor& enc_out, const std::vector<int>& tgt_in_ids) const;

    std::vector<std::pair<std::string, Tensor>> named_params() const;
    long long actual_param_count() const;

  private:
    friend class MoeModel;
    friend DenseModel dense_from_parts(MoeConfig, std::string, std::vector<RoutingDecision>,
                                       std::vector<std::pair<std::string, Tensor>>);
    // The kept experts live in banks of size top_k; gates_[i] pairs with
    // frozen_[i] in (side-major, layer-minor) order: enc 0..L-1, dec 0..L-1.
    MoeConfig cfg_;
    std::string origin_task_key_;
    std::vector<RoutingDecision> frozen_;
    Tensor tok_emb_, out_w_, out_b_;
    LayerNormParams enc_final_, dec_final_;
    std::vector<EncoderLayer> enc_;
    std::vector<DecoderLayer> dec_;
    std::vector<double> pos_enc_;

    Tensor embed(const std::vector<int>& ids) const;
    Tensor fixed_ffn(const Tensor& x, const ExpertBank& bank, int layer, Side side) const;
    const RoutingDecision& decision_for(int layer, Side side) const;
};

/// Rebuild a DenseModel from serialized parts (checkpoint loading).
DenseModel dense_from_parts(MoeConfig cfg, std::string origin_task_key,
                            std::vector<RoutingDecision> frozen,
                            std::vector<std::pair<std::string, Tensor>> tensors);

/// Closed-form parameter count for a configuration and task-universe size.
/// Matches MoeModel::actual_param_count exactly.
long long param_count(const MoeConfig& cfg, int n_tasks);

/// Two-expert feed-forward mix: gates[0]*FFN_a(x) + gates[1]*FFN_b(x).
/// Shared by the MoE and extracted-dense paths so both produce identical
/// arithmetic.
Tensor expert_pair_forward(const Tensor& x, const std::vector<const FfnExpert*>& experts,
                           const std::vector<Tensor>& gate_scalars);

}  // namespace taskmoe
