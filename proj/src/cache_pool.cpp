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

#include "prfaas/cache_pool.h"

#include <algorithm>
#include <mutex>
#include <tuple>

#include "prfaas/error.h"

namespace prfaas {

namespace {

constexpr uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr uint64_t kFnvPrime = 1099511628211ULL;

uint64_t chain(uint64_t parent_hash, std::span<const TokenId> span) {
  uint64_t h = kFnvOffset ^ parent_hash;
  h *= kFnvPrime;
  for (TokenId t : span) {
    const auto v = static_cast<uint32_t>(t);
    for (int b = 0; b < 4; ++b) {
      h ^= (v >> (8 * b)) & 0xffu;
      h *= kFnvPrime;
    }
  }
  return h;
}

const char* group_name(CacheGroup g) {
  return g == CacheGroup::kFullAttention ? "full_attention" : "linear_state";
}

const char* category_name(BlockCategory c) {
  return c == BlockCategory::kPrefix ? "prefix" : "transfer";
}

}  // namespace

HybridCachePool::HybridCachePool(CachePoolOptions options)
    : options_(options) {
  if (options_.capacity_blocks < 1 || options_.block_size < 1) {
    throw Error(ErrorKind::kConfigError,
                "cache pool needs capacity_blocks >= 1 and block_size >= 1");
  }
  blocks_.resize(static_cast<size_t>(options_.capacity_blocks));
  free_.reserve(blocks_.size());
  for (BlockId id = options_.capacity_blocks - 1; id >= 0; --id) {
    free_.push_back(id);
  }
}

BlockId HybridCachePool::take_block() {
  if (free_.empty()) evict_locked(1);
  const BlockId id = free_.back();
  free_.pop_back();
  blocks_[id] = CacheBlock{};
  blocks_[id].id = id;
  return id;
}

void HybridCachePool::free_block(BlockId id) {
  blocks_[id] = CacheBlock{};
  free_.push_back(id);
}

bool HybridCachePool::is_indexed(BlockId id) const {
  const auto& b = blocks_.at(id);
  if (!b.in_use()) return false;
  auto [lo, hi] = index_.equal_range(b.chain_hash);
  for (auto it = lo; it != hi; ++it) {
    if (it->second == id) return true;
  }
  return false;
}

std::vector<BlockId> HybridCachePool::indexed_blocks() const {
  std::vector<BlockId> ids;
  for (const auto& [h, id] : index_) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

BlockId HybridCachePool::find_child(BlockId parent, uint64_t hash,
                                    std::span<const TokenId> span,
                                    bool full) const {
  const auto& table = full ? index_ : partials_;
  auto [lo, hi] = table.equal_range(hash);
  for (auto it = lo; it != hi; ++it) {
    const auto& b = blocks_[it->second];
    if (b.parent == parent &&
        std::equal(b.tokens.begin(), b.tokens.end(), span.begin(), span.end())) {
      return b.id;
    }
  }
  return -1;
}

std::vector<BlockId> HybridCachePool::walk(
    std::span<const TokenId> tokens) const {
  std::vector<BlockId> chain_ids;
  const auto bs = static_cast<size_t>(options_.block_size);
  BlockId parent = -1;
  uint64_t h = 0;
  for (size_t k = 0; (k + 1) * bs <= tokens.size(); ++k) {
    const auto span = tokens.subspan(k * bs, bs);
    h = chain(h, span);
    const BlockId id = find_child(parent, h, span, /*full=*/true);
    if (id < 0) break;
    chain_ids.push_back(id);
    parent = id;
  }
  return chain_ids;
}

std::vector<BlockId> HybridCachePool::insert_prefix(
    std::span<const TokenId> tokens) {
  std::vector<BlockId> ids;
  if (tokens.empty()) return ids;
  const uint64_t now = ++clock_;
  const auto bs = static_cast<size_t>(options_.block_size);

  // Blocks of this stream stay pinned while later ones are allocated so the
  // eviction triggered by this insert cannot consume its own chain.
  auto unpin_all = [&] {
    for (BlockId id : ids) --blocks_[id].refcount;
  };
  try {
    BlockId parent = -1;
    uint64_t h = 0;
    size_t k = 0;
    for (; (k + 1) * bs <= tokens.size(); ++k) {
      const auto span = tokens.subspan(k * bs, bs);
      h = chain(h, span);
      BlockId id = find_child(parent, h, span, /*full=*/true);
      if (id < 0) {
        id = take_block();
        auto& b = blocks_[id];
        b.group = CacheGroup::kFullAttention;
        b.category = BlockCategory::kPrefix;
        b.fill = options_.block_size;
        b.parent = parent;
        b.depth = static_cast<int64_t>(k);
        b.chain_hash = h;
        b.tokens.assign(span.begin(), span.end());
        if (parent >= 0) ++blocks_[parent].children;
        index_.emplace(h, id);
      }
      blocks_[id].last_touch = now;
      ++blocks_[id].refcount;
      ids.push_back(id);
      parent = id;
    }
    const size_t tail = tokens.size() - k * bs;
    if (tail > 0) {
      const auto span = tokens.subspan(k * bs, tail);
      const uint64_t ph = chain(h, span);
      BlockId id = find_child(parent, ph, span, /*full=*/false);
      if (id < 0) {
        id = take_block();
        auto& b = blocks_[id];
        b.group = CacheGroup::kFullAttention;
        b.category = BlockCategory::kPrefix;
        b.fill = static_cast<int64_t>(tail);
        b.parent = parent;
        b.depth = static_cast<int64_t>(k);
        b.chain_hash = ph;
        b.tokens.assign(span.begin(), span.end());
        if (parent >= 0) ++blocks_[parent].children;
        partials_.emplace(ph, id);
      }
      blocks_[id].last_touch = now;
      ++blocks_[id].refcount;
      ids.push_back(id);
    }

    const BlockId anchor = ids.back();
    if (blocks_[anchor].linear_state < 0) {
      const BlockId sid = take_block();
      auto& s = blocks_[sid];
      s.group = CacheGroup::kLinearState;
      s.category = BlockCategory::kPrefix;
      s.fill = options_.block_size;
      s.anchor = anchor;
      s.state_length = static_cast<int64_t>(tokens.size());
      blocks_[anchor].linear_state = sid;
    }
    blocks_[blocks_[anchor].linear_state].last_touch = now;
  } catch (...) {
    unpin_all();
    throw;
  }
  unpin_all();
  return ids;
}

MatchInfo HybridCachePool::match(std::span<const TokenId> tokens) const {
  MatchInfo m;
  const auto chain_ids = walk(tokens);
  m.l_matched = static_cast<int64_t>(chain_ids.size()) * options_.block_size;
  if (!chain_ids.empty()) {
    const BlockId sid = blocks_[chain_ids.back()].linear_state;
    m.linear_state_hit = sid >= 0 && blocks_[sid].state_length == m.l_matched;
  }
  return m;
}

std::vector<BlockId> HybridCachePool::acquire(std::span<const TokenId> tokens) {
  auto ids = walk(tokens);
  const uint64_t now = ++clock_;
  if (!ids.empty()) {
    const BlockId sid = blocks_[ids.back()].linear_state;
    if (sid >= 0) ids.push_back(sid);
  }
  for (BlockId id : ids) {
    ++blocks_[id].refcount;
    blocks_[id].last_touch = now;
  }
  return ids;
}

void HybridCachePool::release(std::span<const BlockId> ids) {
  for (BlockId id : ids) {
    auto& b = blocks_.at(id);
    if (b.refcount > 0) --b.refcount;
  }
}

std::vector<BlockId> HybridCachePool::allocate_transfer(
    const std::string& request_id, int64_t n_blocks) {
  if (transfers_.count(request_id)) {
    throw Error(ErrorKind::kConfigError,
                "request " + request_id + " already has a transfer allocation");
  }
  if (n_blocks > free_blocks()) evict_locked(n_blocks - free_blocks());
  std::vector<BlockId> ids;
  const uint64_t now = ++clock_;
  for (int64_t i = 0; i < n_blocks; ++i) {
    const BlockId id = free_.back();
    free_.pop_back();
    auto& b = blocks_[id];
    b = CacheBlock{};
    b.id = id;
    b.group = CacheGroup::kFullAttention;
    b.category = BlockCategory::kTransfer;
    b.fill = options_.block_size;
    b.refcount = 1;
    b.last_touch = now;
    b.request_id = request_id;
    ids.push_back(id);
  }
  transfers_[request_id] = ids;
  return ids;
}

int64_t HybridCachePool::complete_transfer(const std::string& request_id) {
  auto it = transfers_.find(request_id);
  if (it == transfers_.end()) {
    throw Error(ErrorKind::kUnknownRequest,
                "no active transfer for request " + request_id);
  }
  for (BlockId id : it->second) free_block(id);
  const auto n = static_cast<int64_t>(it->second.size());
  transfers_.erase(it);
  return n;
}

std::vector<BlockId> HybridCachePool::evict(int64_t n_blocks) {
  if (n_blocks <= free_blocks()) return {};
  return evict_locked(n_blocks - free_blocks());
}

std::vector<BlockId> HybridCachePool::evict_locked(int64_t n_blocks) {
  // Whatever is not pinned and not an ancestor of a pinned block can
  // eventually be reached by leaf-first eviction.
  std::vector<char> protect(blocks_.size(), 0);
  for (const auto& b : blocks_) {
    if (!b.in_use() || b.refcount == 0) continue;
    protect[b.id] = 1;
    BlockId cur = b.group == CacheGroup::kLinearState ? b.anchor : b.parent;
    while (cur >= 0 && !protect[cur]) {
      protect[cur] = 1;
      cur = blocks_[cur].parent;
    }
  }
  int64_t reclaimable = 0;
  for (const auto& b : blocks_) {
    if (b.in_use() && b.category == BlockCategory::kPrefix && !protect[b.id]) {
      ++reclaimable;
    }
  }
  if (reclaimable < n_blocks) {
    throw Error(ErrorKind::kPoolExhausted,
                "need " + std::to_string(n_blocks) + " blocks, only " +
                    std::to_string(reclaimable) + " evictable");
  }

  std::vector<BlockId> evicted;
  auto erase_from = [](std::unordered_multimap<uint64_t, BlockId>& table,
                       uint64_t h, BlockId id) {
    auto [lo, hi] = table.equal_range(h);
    for (auto it = lo; it != hi; ++it) {
      if (it->second == id) {
        table.erase(it);
        return;
      }
    }
  };
  while (static_cast<int64_t>(evicted.size()) < n_blocks) {
    // Candidates: unpinned prefix blocks without child blocks, and unpinned
    // linear states. Oldest touch first, then the deeper entry (a state sits
    // one level below its anchor), states before blocks, then id.
    BlockId victim = -1;
    auto key = [&](const CacheBlock& b) {
      const bool state = b.group == CacheGroup::kLinearState;
      const int64_t depth = state ? blocks_[b.anchor].depth + 1 : b.depth;
      return std::make_tuple(b.last_touch, -depth, state ? 0 : 1, b.id);
    };
    for (const auto& b : blocks_) {
      if (!b.in_use() || b.category != BlockCategory::kPrefix || b.refcount > 0 ||
          protect[b.id]) {
        continue;
      }
      if (b.group == CacheGroup::kFullAttention && b.children > 0) continue;
      if (victim < 0 || key(b) < key(blocks_[victim])) victim = b.id;
    }
    const CacheBlock b = blocks_[victim];
    if (b.group == CacheGroup::kLinearState) {
      blocks_[b.anchor].linear_state = -1;
    } else {
      if (b.fill == options_.block_size) {
        erase_from(index_, b.chain_hash, b.id);
      } else {
        erase_from(partials_, b.chain_hash, b.id);
      }
      if (b.parent >= 0) --blocks_[b.parent].children;
      // The recorded state covers tokens in this block, so it goes too.
      if (b.linear_state >= 0) {
        evicted.push_back(b.linear_state);
        free_block(b.linear_state);
      }
    }
    evicted.push_back(b.id);
    free_block(b.id);
  }
  return evicted;
}

int64_t HybridCachePool::transfer_bytes(const MatchInfo& m) const {
  const int64_t blocks = m.l_matched / options_.block_size;
  return blocks * options_.full_attention_bytes_per_block +
         (m.linear_state_hit ? options_.linear_state_bytes : 0);
}

nlohmann::json HybridCachePool::dump() const {
  nlohmann::json j;
  j["options"] = {{"capacity_blocks", options_.capacity_blocks},
                  {"block_size", options_.block_size},
                  {"full_attention_bytes_per_block",
                   options_.full_attention_bytes_per_block},
                  {"linear_state_bytes", options_.linear_state_bytes}};
  j["clock"] = clock_;
  auto& blocks = j["blocks"] = nlohmann::json::array();
  for (const auto& b : blocks_) {
    if (!b.in_use()) continue;
    nlohmann::json e = {{"id", b.id},
                        {"group", group_name(b.group)},
                        {"category", category_name(b.category)},
                        {"fill", b.fill},
                        {"refcount", b.refcount},
                        {"last_touch", b.last_touch}};
    if (b.category == BlockCategory::kTransfer) {
      e["request_id"] = b.request_id;
    } else if (b.group == CacheGroup::kLinearState) {
      e["anchor"] = b.anchor;
      e["state_length"] = b.state_length;
    } else {
      e["parent"] = b.parent;
      e["depth"] = b.depth;
      e["tokens"] = b.tokens;
    }
    blocks.push_back(std::move(e));
  }
  auto& transfers = j["transfers"] = nlohmann::json::object();
  for (const auto& [rid, ids] : transfers_) transfers[rid] = ids;
  return j;
}

HybridCachePool HybridCachePool::restore(const nlohmann::json& j) {
  try {
    CachePoolOptions o;
    const auto& jo = j.at("options");
    o.capacity_blocks = jo.at("capacity_blocks").get<int64_t>();
    o.block_size = jo.at("block_size").get<int64_t>();
    o.full_attention_bytes_per_block =
        jo.value("full_attention_bytes_per_block", int64_t{0});
    o.linear_state_bytes = jo.value("linear_state_bytes", int64_t{0});
    HybridCachePool pool(o);
    pool.clock_ = j.value("clock", uint64_t{0});
    pool.free_.clear();
    for (const auto& e : j.at("blocks")) {
      CacheBlock b;
      b.id = e.at("id").get<BlockId>();
      if (b.id < 0 || b.id >= o.capacity_blocks) {
        throw Error(ErrorKind::kConfigError, "block id out of range");
      }
      b.group = e.at("group").get<std::string>() == "linear_state"
                    ? CacheGroup::kLinearState
                    : CacheGroup::kFullAttention;
      b.category = e.at("category").get<std::string>() == "transfer"
                       ? BlockCategory::kTransfer
                       : BlockCategory::kPrefix;
      b.fill = e.at("fill").get<int64_t>();
      b.refcount = e.at("refcount").get<int64_t>();
      b.last_touch = e.at("last_touch").get<uint64_t>();
      b.request_id = e.value("request_id", std::string());
      b.anchor = e.value("anchor", BlockId{-1});
      b.state_length = e.value("state_length", int64_t{0});
      b.parent = e.value("parent", BlockId{-1});
      b.depth = e.value("depth", int64_t{0});
      if (e.contains("tokens")) b.tokens = e["tokens"].get<std::vector<TokenId>>();
      pool.blocks_[b.id] = std::move(b);
    }
    for (BlockId id = o.capacity_blocks - 1; id >= 0; --id) {
      if (!pool.blocks_[id].in_use()) pool.free_.push_back(id);
    }
    for (const auto& [rid, ids] : j.at("transfers").items()) {
      pool.transfers_[rid] = ids.get<std::vector<BlockId>>();
    }
    pool.rebuild_index();
    return pool;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kConfigError,
                std::string("malformed cache pool dump: ") + e.what());
  }
}

void HybridCachePool::rebuild_index() {
  index_.clear();
  partials_.clear();
  // Parents precede children in depth order, so hashes can be chained.
  std::vector<BlockId> order;
  for (auto& b : blocks_) {
    b.children = 0;
    if (b.in_use() && b.group == CacheGroup::kFullAttention) {
      b.linear_state = -1;
    }
    if (b.in_use() && b.category == BlockCategory::kPrefix &&
        b.group == CacheGroup::kFullAttention) {
      order.push_back(b.id);
    }
  }
  std::sort(order.begin(), order.end(), [&](BlockId a, BlockId b) {
    return blocks_[a].depth < blocks_[b].depth;
  });
  for (BlockId id : order) {
    auto& b = blocks_[id];
    const uint64_t ph = b.parent >= 0 ? blocks_[b.parent].chain_hash : 0;
    b.chain_hash = chain(ph, b.tokens);
    if (b.parent >= 0) ++blocks_[b.parent].children;
    if (b.fill == options_.block_size) {
      index_.emplace(b.chain_hash, id);
    } else {
      partials_.emplace(b.chain_hash, id);
    }
  }
  for (const auto& b : blocks_) {
    if (b.in_use() && b.group == CacheGroup::kLinearState && b.anchor >= 0) {
      blocks_[b.anchor].linear_state = b.id;
    }
  }
}

void KvCacheManager::add_cluster(const std::string& name,
                                 CachePoolOptions options) {
  std::unique_lock lock(mu_);
  if (!pools_.empty()) {
    const auto& first = pools_.begin()->second.options();
    if (first.block_size != options.block_size) {
      throw Error(ErrorKind::kConfigError, "block sizes must align across pools");
    }
  }
  pools_.insert_or_assign(name, HybridCachePool(options));
}

HybridCachePool& KvCacheManager::pool(const std::string& cluster) {
  auto it = pools_.find(cluster);
  if (it == pools_.end()) {
    throw Error(ErrorKind::kConfigError, "unknown cluster " + cluster);
  }
  return it->second;
}

std::vector<BlockId> KvCacheManager::insert_prefix(
    const std::string& cluster, std::span<const TokenId> tokens) {
  std::unique_lock lock(mu_);
  return pool(cluster).insert_prefix(tokens);
}

std::vector<MatchInfo> KvCacheManager::match(
    std::span<const TokenId> tokens) const {
  std::shared_lock lock(mu_);
  std::vector<MatchInfo> out;
  for (const auto& [name, p] : pools_) {
    MatchInfo m = p.match(tokens);
    m.cluster = name;
    out.push_back(m);
  }
  return out;
}

std::vector<BlockId> KvCacheManager::allocate_transfer(
    const std::string& cluster, const std::string& request_id,
    int64_t n_blocks) {
  std::unique_lock lock(mu_);
  return pool(cluster).allocate_transfer(request_id, n_blocks);
}

int64_t KvCacheManager::complete_transfer(const std::string& cluster,
                                          const std::string& request_id) {
  std::unique_lock lock(mu_);
  return pool(cluster).complete_transfer(request_id);
}

HybridCachePool KvCacheManager::snapshot(const std::string& cluster) const {
  std::shared_lock lock(mu_);
  auto it = pools_.find(cluster);
  if (it == pools_.end()) {
    throw Error(ErrorKind::kConfigError, "unknown cluster " + cluster);
  }
  return it->second;
}

nlohmann::json KvCacheManager::dump() const {
  std::shared_lock lock(mu_);
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, p] : pools_) j[name] = p.dump();
  return j;
}

void KvCacheManager::restore(const nlohmann::json& j) {
  std::map<std::string, HybridCachePool> pools;
  for (const auto& [name, pj] : j.items()) {
    pools.insert_or_assign(name, HybridCachePool::restore(pj));
  }
  std::unique_lock lock(mu_);
  pools_ = std::move(pools);
}

}  // namespace prfaas
