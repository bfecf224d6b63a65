import * as net from 'node:net';
import { afterEach, beforeEach, describe, expect, it } from 'vitest';
import { Relay } from '../src/relay.js';

/** Minimal scripted stand-in for the auth-client bridge. */
class FakeBridge {
  server: net.Server;
  received: string[] = [];
  private conns: net.Socket[] = [];
  port = 0;

  async start(): Promise<void> {
    this.server = net.createServer((socket) => {
      this.conns.push(socket);
      socket.setEncoding('utf-8');
      socket.write(
        JSON.stringify({
          type: 'SESSION_STATE',
          phase: 'collecting',
          user_id: 'alice',
          typed: 0,
        }) + '\n',
      );
      socket.on('data', (chunk: string) => {
        for (const line of chunk.split('\n')) {
          if (line.trim()) this.received.push(line);
        }
      });
    });
    await new Promise<void>((resolve) =>
      this.server.listen(0, '127.0.0.1', resolve),
    );
    this.port = (this.server.address() as net.AddressInfo).port;
  }

  push(record: object): void {
    for (const conn of this.conns) conn.write(JSON.stringify(record) + '\n');
  }

  stop(): void {
    for (const conn of this.conns) conn.destroy();
    this.server.close();
  }
}

describe('relay', () => {
  let bridge: FakeBridge;
  let relay: Relay;
  let port: number;

  beforeEach(async () => {
    bridge = new FakeBridge();
    await bridge.start();
    relay = new Relay({ bridgeHost: '127.0.0.1', bridgePort: bridge.port });
    port = await relay.start(0);
  });

  afterEach(() => {
    relay.stop();
    bridge.stop();
  });

  it('serves the console page', async () => {
    const res = await fetch(`http://127.0.0.1:${port}/index.html`);
    expect(res.status).toBe(200);
    const body = await res.text();
    expect(body).toContain('eegpass console');
    expect(body).toContain('steer-attention');
  });

  it('streams bridge records as server-sent events', async () => {
    const res = await fetch(`http://127.0.0.1:${port}/events`);
    expect(res.status).toBe(200);
    const reader = res.body!.getReader();
    const decoder = new TextDecoder();
    let buffer = '';

    const readEvent = async (): Promise<object> => {
      for (;;) {
        const i = buffer.indexOf('\n\n');
        if (i >= 0) {
          const raw = buffer.slice(0, i);
          buffer = buffer.slice(i + 2);
          return JSON.parse(raw.replace(/^data: /, ''));
        }
        const { value, done } = await reader.read();
        if (done) throw new Error('stream ended');
        buffer += decoder.decode(value);
      }
    };

    const first = (await readEvent()) as { type: string; phase?: string };
    expect(first.type).toBe('SESSION_STATE');

    bridge.push({
      type: 'LEVELS',
      t_ms: 500,
      attention: 70,
      meditation: 30,
      attention_level: 'R',
      meditation_level: 'L',
      attention_near_edge: false,
      meditation_near_edge: false,
    });
    const second = (await readEvent()) as { type: string; attention?: number };
    expect(second.type).toBe('LEVELS');
    expect(second.attention).toBe(70);
    await reader.cancel();
  });

  it('forwards console input upstream and rejects anything else', async () => {
    const ok = await fetch(`http://127.0.0.1:${port}/send`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ type: 'KEY', ch: 'q' }),
    });
    expect(ok.status).toBe(200);
    await new Promise((r) => setTimeout(r, 50));
    expect(bridge.received).toContain('{"type":"KEY","ch":"q"}');

    const bad = await fetch(`http://127.0.0.1:${port}/send`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ type: 'ENROLL_BEGIN', template: '[[a,H,0]]' }),
    });
    expect(bad.status).toBe(400);
    await new Promise((r) => setTimeout(r, 50));
    expect(bridge.received.some((l) => l.includes('ENROLL'))).toBe(false);
  });
});
