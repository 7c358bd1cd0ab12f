"use strict";

const $ = (id) => document.getElementById(id);
const log = $("log");
const card = $("card");
const composer = $("composer");
const draft = $("draft");
const send = $("send");

let sessionId = sessionStorage.getItem("session_id");
if (!sessionId) {
  sessionId = crypto.randomUUID();
  sessionStorage.setItem("session_id", sessionId);
}

// pending: {pending_id, interventions} while a card is open
let pending = null;
// true once the user picked a rephrase option; the next send resolves the card
let rephrasing = false;
let inFlight = false;
let transparencyCache = null;

function append(cls, text) {
  const el = document.createElement("div");
  el.className = cls;
  el.textContent = text;
  log.appendChild(el);
  el.scrollIntoView({ block: "end" });
  return el;
}

function setComposer() {
  const locked = inFlight || (pending !== null && !rephrasing);
  draft.disabled = locked;
  send.disabled = locked;
  composer.classList.toggle("rephrasing", rephrasing);
}

function showGuidance(clarity) {
  if (!clarity) return;
  const badge = $("guidance");
  badge.textContent = clarity.guidance_level.replace("_", " ");
  badge.hidden = false;
}

function showCrisis(interventions) {
  const referral = interventions.find((i) => i.kind === "crisis_referral");
  if (!referral) return;
  $("crisis-message").textContent = referral.message;
  const list = $("crisis-links");
  list.replaceChildren();
  for (const link of referral.referral_links || []) {
    const li = document.createElement("li");
    const a = document.createElement("a");
    a.href = link.url;
    a.textContent = link.name;
    a.rel = "noopener";
    a.target = "_blank";
    li.appendChild(a);
    list.appendChild(li);
  }
  $("crisis").hidden = false;
}

function showInline(interventions) {
  for (const iv of interventions) {
    if (iv.kind === "prompt_hint") {
      const el = append("hint", iv.message);
      for (const opt of iv.options || []) {
        if (opt.action !== "rephrase_with") continue;
        const b = document.createElement("button");
        b.type = "button";
        b.textContent = opt.label;
        b.addEventListener("click", () => {
          draft.value = opt.text;
          draft.focus();
        });
        el.appendChild(document.createElement("br"));
        el.appendChild(b);
      }
    } else if (iv.kind === "transparency_note") {
      append("note", iv.message);
    }
  }
}

function cardNotice(text) {
  const p = document.createElement("p");
  p.className = "notice";
  p.textContent = text;
  card.appendChild(p);
}

function openCard(outcome) {
  pending = { pending_id: outcome.pending_id, interventions: outcome.interventions };
  rephrasing = false;
  card.replaceChildren();
  for (const iv of outcome.interventions) {
    if (iv.kind === "disclosure_reflection") {
      const p = document.createElement("p");
      p.textContent = iv.message;
      card.appendChild(p);
      const actions = document.createElement("div");
      actions.className = "actions";
      for (const opt of iv.options || []) {
        const b = document.createElement("button");
        b.type = "button";
        b.textContent = opt.label;
        b.addEventListener("click", () => chooseOption(opt));
        actions.appendChild(b);
      }
      card.appendChild(actions);
    } else if (iv.kind === "prompt_hint") {
      const p = document.createElement("p");
      p.className = "hint";
      p.textContent = iv.message;
      card.appendChild(p);
    }
  }
  showCrisis(outcome.interventions);
  card.hidden = false;
  setComposer();
}

function closeCard() {
  pending = null;
  rephrasing = false;
  card.hidden = true;
  card.replaceChildren();
  setComposer();
}

function chooseOption(opt) {
  if (opt.action === "continue") {
    resolve("continue");
  } else if (opt.action === "rephrase_with") {
    rephrasing = true;
    draft.value = opt.text;
    setComposer();
    draft.focus();
  } else {
    rephrasing = true;
    setComposer();
    draft.focus();
  }
}

async function post(path, body) {
  const resp = await fetch(path, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
  const data = await resp.json().catch(() => ({}));
  return { ok: resp.ok, status: resp.status, data };
}

function handleOutcome(outcome) {
  showGuidance(outcome.clarity);
  if (outcome.outcome === "held") {
    openCard(outcome);
    return;
  }
  closeCard();
  showCrisis(outcome.interventions);
  append("bubble assistant", outcome.assistant_text);
  showInline(outcome.interventions);
}

async function resolve(action, text) {
  inFlight = true;
  setComposer();
  try {
    const body = { session_id: sessionId, pending_id: pending.pending_id, action };
    if (text !== undefined) body.text = text;
    const r = await post("/v1/decision", body);
    if (r.ok) {
      if (text !== undefined) {
        append("bubble user", text);
        draft.value = "";
      }
      handleOutcome(r.data);
    } else if (r.status === 403) {
      cardNotice("Continuing is unavailable for this message. You can rephrase it instead.");
    } else if (r.status === 404) {
      cardNotice("This message is no longer pending.");
      closeCard();
    } else {
      cardNotice(r.data.message || `Request failed (${r.status}).`);
    }
  } catch (e) {
    cardNotice("The gateway is unreachable.");
  } finally {
    inFlight = false;
    setComposer();
  }
}

composer.addEventListener("submit", async (ev) => {
  ev.preventDefault();
  const text = draft.value;
  if (!text.trim() || inFlight) return;
  if (pending !== null) {
    if (rephrasing) await resolve("rephrase", text);
    return;
  }
  inFlight = true;
  setComposer();
  try {
    const r = await post("/v1/chat", { session_id: sessionId, text });
    if (r.ok) {
      if (r.data.outcome === "forwarded") {
        append("bubble user", text);
        draft.value = "";
      }
      handleOutcome(r.data);
    } else if (r.status === 409) {
      append("notice", "Please answer the pending question first.");
    } else if (r.status === 422) {
      append("notice", "Messages cannot be empty.");
    } else if (r.status === 502) {
      append("notice", "The model could not be reached. Your message was kept; try again.");
    } else {
      append("notice", r.data.message || `Request failed (${r.status}).`);
    }
  } catch (e) {
    append("notice", "The gateway is unreachable. Your message was kept.");
  } finally {
    inFlight = false;
    setComposer();
  }
});

$("about").addEventListener("click", async () => {
  const panel = $("panel");
  const body = $("panel-body");
  panel.hidden = false;
  if (transparencyCache === null) {
    try {
      const resp = await fetch("/v1/transparency");
      if (!resp.ok) throw new Error(String(resp.status));
      transparencyCache = await resp.json();
    } catch (e) {
      body.textContent = "Could not load this page; the gateway appears to be offline.";
      return;
    }
  }
  body.replaceChildren();
  for (const entry of transparencyCache) {
    const p = document.createElement("p");
    p.textContent = entry.message;
    body.appendChild(p);
  }
});

$("panel-close").addEventListener("click", () => {
  $("panel").hidden = true;
});

setComposer();
