/* Copyright 2026 The prfaas-pd Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstdint>
#include <map>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace prfaas {

using TokenId = int32_t;
using BlockId = int64_t;

enum class CacheGroup { kFullAttention, kLinearState };
enum class BlockCategory { kPrefix, kTransfer };

// Every group draws whole blocks of the same block_size from one shared
// pool. A linear-attention state is request-level and occupies one block.
struct CachePoolOptions {
  int64_t capacity_blocks = 1024;
  int64_t block_size = 256;
  int64_t full_attention_bytes_per_block = 0;
  int64_t linear_state_bytes = 0;
};

struct CacheBlock {
  BlockId id = -1;
  CacheGroup group = CacheGroup::kFullAttention;
  BlockCategory category = BlockCategory::kPrefix;
  int64_t fill = 0;  // tokens populated, <= block_size
  int64_t refcount = 0;
  uint64_t last_touch = 0;

  // Prefix chain (full-attention prefix blocks).
  BlockId parent = -1;
  int64_t depth = 0;  // index of this block in its token stream
  uint64_t chain_hash = 0;
  std::vector<TokenId> tokens;
  int64_t children = 0;
  BlockId linear_state = -1;  // state recorded at the end of this block

  // Linear state: anchor block and the exact token length it covers.
  BlockId anchor = -1;
  int64_t state_length = 0;

  // Transfer blocks.
  std::string request_id;

  bool in_use() const { return id >= 0; }
};

struct MatchInfo {
  std::string cluster;
  int64_t l_matched = 0;  // block-aligned full-attention prefix
  bool linear_state_hit = false;

  // A hybrid model resumes only from a full-attention prefix that also has
  // its recurrent state at exactly that length.
  int64_t usable_prefix() const { return linear_state_hit ? l_matched : 0; }
};

// One cluster's pool: block table, prefix index, transfer allocations and
// LRU eviction. Not thread-safe; KvCacheManager serializes access.
class HybridCachePool {
 public:
  explicit HybridCachePool(CachePoolOptions options);

  const CachePoolOptions& options() const { return options_; }
  int64_t capacity() const { return options_.capacity_blocks; }
  int64_t free_blocks() const { return static_cast<int64_t>(free_.size()); }
  int64_t allocated_blocks() const { return capacity() - free_blocks(); }

  // Full blocks become matchable; a trailing partial block is kept but not
  // indexed; a linear state is recorded at the exact total length. Returns
  // the stream's block ids in order.
  std::vector<BlockId> insert_prefix(std::span<const TokenId> tokens);

  // Read-only longest block-aligned match.
  MatchInfo match(std::span<const TokenId> tokens) const;

  // Pins the matched blocks (and state) against eviction and refreshes their
  // LRU time. Returns the pinned ids for release().
  std::vector<BlockId> acquire(std::span<const TokenId> tokens);
  void release(std::span<const BlockId> ids);

  std::vector<BlockId> allocate_transfer(const std::string& request_id,
                                         int64_t n_blocks);
  int64_t complete_transfer(const std::string& request_id);

  // Frees at least n_blocks by LRU over unpinned prefix blocks that have no
  // dependents. Throws PoolExhausted (leaving the pool untouched) when the
  // evictable set is too small.
  std::vector<BlockId> evict(int64_t n_blocks);

  const CacheBlock& block(BlockId id) const { return blocks_.at(id); }
  bool is_indexed(BlockId id) const;
  std::vector<BlockId> indexed_blocks() const;
  bool has_transfer(const std::string& request_id) const {
    return transfers_.count(request_id) > 0;
  }
  int64_t transfer_bytes(const MatchInfo& m) const;

  nlohmann::json dump() const;
  static HybridCachePool restore(const nlohmann::json& j);

 private:
  BlockId take_block();
  void free_block(BlockId id);
  std::vector<BlockId> evict_locked(int64_t n_blocks);
  BlockId find_child(BlockId parent, uint64_t hash,
                     std::span<const TokenId> span, bool full) const;
  std::vector<BlockId> walk(std::span<const TokenId> tokens) const;
  void rebuild_index();

  CachePoolOptions options_;
  std::vector<CacheBlock> blocks_;  // slot i holds block id i when in use
  std::vector<BlockId> free_;
  uint64_t clock_ = 0;
  // chain hash -> full prefix blocks; partial tails are kept separately.
  std::unordered_multimap<uint64_t, BlockId> index_;
  std::unordered_multimap<uint64_t, BlockId> partials_;
  std::map<std::string, std::vector<BlockId>> transfers_;
};

// The global KVCache manager view: one pool per cluster, prefix-match
// information for every cluster. match() takes a shared lock and never sees
// a half-applied mutation.
class KvCacheManager {
 public:
  void add_cluster(const std::string& name, CachePoolOptions options);

  std::vector<BlockId> insert_prefix(const std::string& cluster,
                                     std::span<const TokenId> tokens);
  std::vector<MatchInfo> match(std::span<const TokenId> tokens) const;
  std::vector<BlockId> allocate_transfer(const std::string& cluster,
                                         const std::string& request_id,
                                         int64_t n_blocks);
  int64_t complete_transfer(const std::string& cluster,
                            const std::string& request_id);

  // Copy of one cluster's pool for inspection.
  HybridCachePool snapshot(const std::string& cluster) const;

  nlohmann::json dump() const;
  // Replaces all clusters with the dumped state.
  void restore(const nlohmann::json& j);

 private:
  HybridCachePool& pool(const std::string& cluster);

  mutable std::shared_mutex mu_;
  std::map<std::string, HybridCachePool> pools_;
};

}  // namespace prfaas
