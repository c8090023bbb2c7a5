// Minimal server-sent-events client over fetch streaming, usable both in the
// browser and under node, with automatic reconnect and a staleness signal the
// dashboard surfaces as a banner.

export type ConnectionState = "connecting" | "live" | "stale";

export interface SseEvent {
  event: string;
  data: string;
}

export interface SseHandlers {
  onEvent: (event: SseEvent) => void;
  onStateChange?: (state: ConnectionState) => void;
}

export interface ParseResult {
  buffer: string;
  events: SseEvent[];
}

/** Incremental SSE framing: feed chunks, get completed events back. */
export function parseSseChunk(buffer: string, chunk: string): ParseResult {
  let text = buffer + chunk.replace(/\r\n/g, "\n");
  const events: SseEvent[] = [];
  let boundary = text.indexOf("\n\n");
  while (boundary >= 0) {
    const block = text.slice(0, boundary);
    text = text.slice(boundary + 2);
    let eventName = "message";
    const dataLines: string[] = [];
    for (const line of block.split("\n")) {
      if (line.startsWith(":")) continue; // comment / keepalive
      if (line.startsWith("event:")) eventName = line.slice(6).trim();
      else if (line.startsWith("data:")) dataLines.push(line.slice(5).trim());
    }
    if (dataLines.length > 0) {
      events.push({ event: eventName, data: dataLines.join("\n") });
    }
    boundary = text.indexOf("\n\n");
  }
  return { buffer: text, events };
}

export interface Subscription {
  close: () => void;
}

/** Subscribe to an SSE endpoint; reconnects with capped backoff on failure. */
export function subscribe(url: string, handlers: SseHandlers): Subscription {
  let closed = false;
  let controller: AbortController | null = null;
  let retryMs = 500;

  const notify = (state: ConnectionState) => handlers.onStateChange?.(state);

  const loop = async () => {
    while (!closed) {
      controller = new AbortController();
      notify("connecting");
      try {
        const response = await fetch(url, {
          signal: controller.signal,
          headers: { accept: "text/event-stream" },
        });
        if (!response.ok || !response.body) {
          throw new Error(`stream unavailable (${response.status})`);
        }
        notify("live");
        retryMs = 500;
        const reader = response.body.getReader();
        const decoder = new TextDecoder();
        let buffer = "";
        for (;;) {
          const { done, value } = await reader.read();
          if (done) break;
          const parsed = parseSseChunk(buffer, decoder.decode(value, { stream: true }));
          buffer = parsed.buffer;
          for (const event of parsed.events) handlers.onEvent(event);
        }
      } catch {
        // fall through to the reconnect path
      }
      if (closed) break;
      notify("stale");
      await new Promise((resolve) => setTimeout(resolve, retryMs));
      retryMs = Math.min(retryMs * 2, 10_000);
    }
  };
  void loop();

  return {
    close: () => {
      closed = true;
      controller?.abort();
    },
  };
}
